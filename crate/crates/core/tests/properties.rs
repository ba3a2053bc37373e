use chemoflow::chemo::{init_state, step_system, Preset, SimParams};
use chemoflow::fluid::{project, FluidConfig};
use chemoflow::functionals::h;
use chemoflow::grid::{advect, chemotaxis_flux_div, divergence, laplacian, Bc, Grid, ScalarField, VectorField};
use chemoflow::runner::acceptance::random_field;
use chemoflow::runner::RunConfig;
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = Grid> {
    (8usize..20, 8usize..20, 0.5f64..3.0, 0.5f64..3.0).prop_map(|(nx, ny, lx, ly)| Grid::new(nx, ny, lx, ly).unwrap())
}

fn field(g: Grid, seed: u64, lo: f64) -> ScalarField {
    let v = random_field(g, seed);
    // reuse the seeded face values as cell data
    ScalarField::with_values(g, Bc::Neumann, (0..g.cells()).map(|k| lo + v.u1[k % v.u1.len()].abs()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_solenoidal_and_idempotent(g in grid(), seed in any::<u64>()) {
        let v = random_field(g, seed);
        let cfg = FluidConfig::default();
        let p = project(&v, &cfg).unwrap();
        let ratio = divergence(&p.velocity).max_abs() / divergence(&v).max_abs();
        prop_assert!(ratio <= 1e-9, "ratio {ratio}");
        prop_assert!(p.velocity.boundary_normal_max() == 0.0);
        let again = project(&p.velocity, &cfg).unwrap();
        let scale = p.velocity.max_abs_u1().max(p.velocity.max_abs_u2());
        let drift = again.velocity.u1.iter().zip(&p.velocity.u1).chain(again.velocity.u2.iter().zip(&p.velocity.u2))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(drift <= 1e-8 * scale);
    }

    #[test]
    fn flux_operators_conserve(g in grid(), seed in any::<u64>()) {
        let f = field(g, seed, 0.0);
        let w = field(g, seed.wrapping_add(1), 0.0);
        let u = random_field(g, seed.wrapping_add(2));
        let scale = f.max_abs() * (u.max_abs_u1() + u.max_abs_u2() + 1.0) * g.cells() as f64 / g.dx().min(g.dy());
        prop_assert!(advect(&f, &u).unwrap().integral().abs() <= 1e-12 * scale * g.cell_area());
        prop_assert!(chemotaxis_flux_div(&f, &w, 0.7).unwrap().integral().abs() <= 1e-11 * scale * g.cell_area() / g.dx().min(g.dy()));
        prop_assert!(laplacian(&f).integral().abs() <= 1e-11 * scale * g.cell_area() / g.dx().min(g.dy()));
    }

    #[test]
    fn h_is_nonnegative(s in 0.0f64..1e3, r in 0.01f64..10.0, mu in 0.01f64..10.0) {
        prop_assert!(h(s, r, mu).unwrap() >= -1e-15 * (1.0 + s));
    }

    #[test]
    fn one_step_preserves_signs(seed in any::<u64>(), chi in 0.05f64..1.0, r in -1.0f64..2.0, mu in 0.1f64..5.0) {
        let g = Grid::square(12, 1.0).unwrap();
        let mut p = SimParams::new(g);
        p.chi = chi;
        p.r = r;
        p.mu = mu;
        p.init.preset = Preset::VortexFluid;
        let mut s = init_state(&p).unwrap();
        s.n = field(g, seed, 0.1);
        let dt = chemoflow::chemo::cfl_dt(&s, &p);
        let rep = step_system(&mut s, &p, &FluidConfig::default(), dt).unwrap();
        prop_assert!(s.n.min() >= 0.0);
        prop_assert!(s.w.min() >= 0.0);
        prop_assert!(rep.div_residual <= 1e-8);
        // mass changes only through the reaction term and clamping
        let expected = rep.mass_before + dt * rep.mass_rate - rep.clamped_n;
        prop_assert!((rep.mass_after - expected).abs() <= 1e-9 * rep.mass_before.max(1.0));
    }

    #[test]
    fn config_text_round_trips(chi in 0.01f64..2.0, r in -2.0f64..2.0, mu in 0.01f64..50.0,
                               nx in 8usize..64, lx in 0.1f64..10.0, every in 0.01f64..1.0) {
        let mut cfg = RunConfig::parse("", &[]).unwrap();
        cfg.params.chi = chi;
        cfg.params.r = r;
        cfg.params.mu = mu;
        cfg.params.grid = Grid::new(nx, nx + 3, lx, lx * 0.5).unwrap();
        cfg.output_every = every;
        let back = RunConfig::parse(&cfg.to_config_string(), &[]).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn solenoidal_vortex_is_a_projection_fixed_point() {
    let g = Grid::new(20, 14, 2.0, 1.4).unwrap();
    let v = VectorField::from_stream_function(g, |x, y| {
        (std::f64::consts::PI * x / 2.0).sin().powi(2) * (std::f64::consts::PI * y / 1.4).sin().powi(2)
    });
    let p = project(&v, &FluidConfig::default()).unwrap();
    let scale = v.max_abs_u1().max(v.max_abs_u2());
    let drift = p.velocity.u1.iter().zip(&v.u1).chain(p.velocity.u2.iter().zip(&v.u2))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift <= 1e-10 * scale, "drift {drift}");
}
