use super::{fits, validate, CopError, Instance, Solution};

/// Objective value of a feasible solution, oriented so larger is better.
///
/// Routing and packing costs come back negated. The solution is validated
/// first; an infeasible solution is a contract violation.
pub fn objective(instance: &Instance, solution: &Solution) -> Result<f64, CopError> {
    let report = validate(instance, solution)?;
    if !report.valid {
        return Err(CopError::InvalidSolution(report.summary()));
    }
    Ok(match (instance, solution) {
        (Instance::Tsp(inst), Solution::Tsp(tour)) => -cycle_length(&inst.distances, tour),
        (Instance::Cvrp(inst), Solution::Cvrp(routes)) => -routes
            .iter()
            .map(|route| route_cost(&inst.distances, route))
            .sum::<f64>(),
        (Instance::Bpp(_), Solution::Bpp(bins)) => {
            -(bins.iter().filter(|b| !b.is_empty()).count() as f64)
        }
        (Instance::Bpp(inst), Solution::BppResidual(remaining)) => {
            // a bin counts as used once anything measurable went in
            -(remaining
                .iter()
                .filter(|&&r| !fits(inst.bin_capacity, r))
                .count() as f64)
        }
        (Instance::Obpp(_), Solution::Obpp(assignment)) => {
            -(assignment.iter().max().map_or(0, |m| m + 1) as f64)
        }
        (Instance::Kp(inst), Solution::Kp(items)) => items.iter().map(|&i| inst.values[i]).sum(),
        (Instance::Mkp(inst), Solution::Mkp(sacks)) => {
            sacks.iter().flatten().map(|&i| inst.values[i]).sum()
        }
        _ => unreachable!("validate rejects mismatched kinds"),
    })
}

/// Mean objective over paired instances and solutions.
pub fn mean_objective<'a>(
    pairs: impl IntoIterator<Item = (&'a Instance, &'a Solution)>,
) -> Result<f64, CopError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (inst, sol) in pairs {
        total += objective(inst, sol)?;
        count += 1;
    }
    if count == 0 {
        return Err(CopError::Dataset("no instances".into()));
    }
    Ok(total / count as f64)
}

pub(crate) fn cycle_length(d: &[Vec<f64>], tour: &[usize]) -> f64 {
    if tour.is_empty() {
        return 0.0;
    }
    let closing = d[tour[tour.len() - 1]][tour[0]];
    tour.windows(2).map(|w| d[w[0]][w[1]]).sum::<f64>() + closing
}

/// Depot, then the customers in order, then back to the depot.
pub(crate) fn route_cost(d: &[Vec<f64>], route: &[usize]) -> f64 {
    match (route.first(), route.last()) {
        (Some(&first), Some(&last)) => {
            d[0][first] + route.windows(2).map(|w| d[w[0]][w[1]]).sum::<f64>() + d[last][0]
        }
        _ => 0.0,
    }
}
