//! Online bin packing with custom priority functions.
//!
//! A scorer sees the arriving item and the remaining room of every open bin
//! and returns one priority per bin.

use redsearch::cop::{
    bin_lower_bound, generate_instances, objective, simulate_online_packing, GeneratorParams,
    Instance, SizeDistribution,
};

fn main() -> anyhow::Result<()> {
    let sizes = SizeDistribution::Weibull { shape: 3.0, scale: 45.0 };
    let data = generate_instances(&GeneratorParams::Obpp { n: 1000, capacity: 100.0, sizes }, 11, 4)?;

    for inst in &data.instances {
        let Instance::Obpp(o) = inst else { unreachable!() };
        let tightest = simulate_online_packing(o, &mut |item: f64, room: &[f64]| {
            room.iter().map(|r| -(r - item)).collect::<Vec<_>>()
        })?;
        let first = simulate_online_packing(o, &mut |_: f64, room: &[f64]| vec![0.0; room.len()])?;
        // the roomiest bin; spreads items thin
        let worst = simulate_online_packing(o, &mut |_: f64, room: &[f64]| room.to_vec())?;
        let bound = bin_lower_bound(&o.item_stream, o.bin_capacity);
        println!(
            "bound {bound}: tightest fit {}, first fit {}, worst fit {}",
            -objective(inst, &tightest)?,
            -objective(inst, &first)?,
            -objective(inst, &worst)?
        );
    }
    Ok(())
}
