//! Projects a random no-slip face field onto the discretely solenoidal
//! subspace and reports the divergence reduction.

use chemoflow::fluid::{project, FluidConfig};
use chemoflow::grid::{divergence, Grid};
use chemoflow::runner::acceptance::random_field;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let g = Grid::square(64, 1.0).unwrap();
    let v = random_field(g, seed);
    let p = project(&v, &FluidConfig::default()).expect("projection");
    let before = divergence(&v).max_abs();
    let after = divergence(&p.velocity).max_abs();
    println!("seed {seed}");
    println!("max |div v|      {before:.3e}");
    println!("max |div P v|    {after:.3e}");
    println!("ratio            {:.3e}", after / before);
    println!("pcg iterations   {}", p.stats.iterations);
    println!("wall normal max  {:.1e}", p.velocity.boundary_normal_max());
}
