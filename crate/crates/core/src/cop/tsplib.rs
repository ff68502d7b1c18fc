use super::{CopError, Instance, TspInstance};

/// A parsed TSPLIB file restricted to symmetric `EUC_2D` problems.
#[derive(Debug, Clone, PartialEq)]
pub struct TsplibFile {
    pub name: String,
    pub comment: String,
    pub instance: TspInstance,
}

/// TSPLIB `nint`: Euclidean distance rounded to the nearest integer.
fn euc_2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).hypot(a[1] - b[1]) + 0.5).floor()
}

impl TsplibFile {
    pub fn parse(text: &str) -> Result<Self, CopError> {
        let err = |m: String| CopError::Tsplib(m);
        let mut name = String::new();
        let mut comment = String::new();
        let mut dimension: Option<usize> = None;
        let mut problem_type: Option<String> = None;
        let mut weight_type: Option<String> = None;
        let mut lines = text.lines();
        let mut found_section = false;

        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("NODE_COORD_SECTION") {
                found_section = true;
                break;
            }
            if line == "EOF" {
                break;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(err(format!("unrecognized header line `{line}`")));
            };
            let value = value.trim().to_string();
            match key.trim() {
                "NAME" => name = value,
                "COMMENT" => comment = value,
                "TYPE" => problem_type = Some(value),
                "DIMENSION" => {
                    dimension = Some(
                        value
                            .parse()
                            .map_err(|_| err(format!("bad DIMENSION `{value}`")))?,
                    )
                }
                "EDGE_WEIGHT_TYPE" => weight_type = Some(value),
                _ => {}
            }
        }

        match problem_type.as_deref() {
            Some("TSP") => {}
            other => return Err(err(format!("unsupported TYPE {other:?}"))),
        }
        match weight_type.as_deref() {
            Some("EUC_2D") => {}
            other => return Err(err(format!("unsupported EDGE_WEIGHT_TYPE {other:?}"))),
        }
        let dimension = dimension.ok_or_else(|| err("missing DIMENSION".into()))?;
        if !found_section {
            return Err(err("missing NODE_COORD_SECTION".into()));
        }

        let mut coords = vec![None; dimension];
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "EOF" {
                break;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("malformed coordinate line `{line}`")));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad node id in `{line}`")))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("bad coordinate in `{line}`")))
            };
            let point = [parse(fields[1])?, parse(fields[2])?];
            if id == 0 || id > dimension {
                return Err(err(format!(
                    "node id {id} outside 1..={dimension} (dimension mismatch)"
                )));
            }
            if coords[id - 1].replace(point).is_some() {
                return Err(err(format!("node {id} listed twice")));
            }
        }
        let coords: Vec<[f64; 2]> = coords
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| err(format!("dimension mismatch: node {} missing", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        let distances = coords
            .iter()
            .map(|&a| coords.iter().map(|&b| euc_2d(a, b)).collect())
            .collect();
        Ok(TsplibFile {
            name,
            comment,
            instance: TspInstance { coords, distances },
        })
    }
}

/// Parses a TSPLIB `EUC_2D` file into a TSP instance with 0-based nodes and
/// integer-rounded distances.
pub fn parse_tsplib(text: &str) -> Result<Instance, CopError> {
    TsplibFile::parse(text).map(|f| Instance::Tsp(f.instance))
}
