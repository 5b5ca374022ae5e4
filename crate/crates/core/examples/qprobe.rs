//! Development probe for the acceptance-run magnitudes.

use spinflow::compat::{generate_initial_data, InitialDataSpec};
use spinflow::experiments::GLOBAL_BOUND_C;
use spinflow::grid::BoxGrid;
use spinflow::integrators::{advance, FlowParams, FlowState, Scheme};
use spinflow::invariants;

fn profile(n: usize, alpha: f64) -> FlowState {
    let grid = BoxGrid::new_1d(n).unwrap();
    let u = generate_initial_data(
        &InitialDataSpec::MirrorSymmetricProfile { amplitudes: vec![alpha] },
        &grid,
    )
    .unwrap();
    FlowState::initial(u)
}

fn midpoint(dt: f64, eps: f64) -> FlowParams {
    let mut p = FlowParams::new(Scheme::ImplicitMidpoint, eps, dt);
    p.override_cfl = true;
    p
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("base");

    match which {
        "base" => {
            // Criteria 1-4 base and refined runs.
            for (n, dt) in [(256usize, 1e-4f64), (512, 2.5e-5)] {
                let t0 = std::time::Instant::now();
                let state = profile(n, 0.5);
                let traj = advance(&state, &midpoint(dt, 0.0), 1.0, 100).unwrap();
                assert!(traj.succeeded(), "{:?}", traj.failure);
                let r0 = &traj.samples[0].record;
                let q0 = r0.q_value.unwrap();
                let e0 = r0.dirichlet_energy;
                let mut max_sphere = 0.0f64;
                let mut max_e_drift = 0.0f64;
                let mut max_q_drift = 0.0f64;
                let mut max_h2 = 0.0f64;
                for r in traj.records() {
                    max_sphere = max_sphere.max(r.sphere_violation);
                    max_e_drift = max_e_drift.max((r.dirichlet_energy - e0).abs() / e0);
                    max_q_drift =
                        max_q_drift.max((r.q_value.unwrap() - q0).abs() / q0.abs().max(1e-12));
                    max_h2 = max_h2.max(r.h2_identity_residual.unwrap());
                }
                println!(
                    "N={n} dt={dt:.1e}: sphere={max_sphere:.3e} e_drift={max_e_drift:.3e} \
                     q_drift={max_q_drift:.3e} h2={max_h2:.3e} q0={q0:.6} [{:.1?}]",
                    t0.elapsed()
                );
            }
        }
        "c5" => {
            // Criterion 5: dissipation-rate match at t = 0.25, eps = 0.1.
            for (n, dt) in [(256usize, 1e-4f64), (512, 2.5e-5)] {
                let state = profile(n, 0.5);
                let traj = advance(&state, &midpoint(dt, 0.1), 0.5, 100).unwrap();
                assert!(traj.succeeded());
                let samples = &traj.samples;
                let i = samples
                    .iter()
                    .position(|s| (s.state.t - 0.25).abs() < 1e-9)
                    .expect("t = 0.25 sampled");
                let (before, at, after) = (&samples[i - 1], &samples[i], &samples[i + 1]);
                let fd = (after.record.dirichlet_energy - before.record.dirichlet_energy)
                    / (after.state.t - before.state.t);
                let predicted = at.record.eps_dissipation_rate.unwrap();
                println!(
                    "N={n}: fd={fd:.6e} predicted={predicted:.6e} rel={:.4}",
                    (fd - predicted).abs() / predicted.abs()
                );
                // monotonicity
                let mono = samples
                    .windows(2)
                    .all(|w| w[1].record.dirichlet_energy <= w[0].record.dirichlet_energy + 1e-10);
                println!("  monotone nonincreasing: {mono}");
            }
        }
        "c6" => {
            // Criterion 6 distances.
            let state = profile(256, 0.5);
            let reference = advance(&state, &midpoint(1e-4, 0.0), 0.25, 250).unwrap();
            let uref = reference.final_state().unwrap().u.as_field().clone();
            let mut ds = Vec::new();
            for eps in [0.1, 0.05, 0.025, 0.0125] {
                let t = advance(&state, &midpoint(1e-4, eps), 0.25, 250).unwrap();
                assert!(t.succeeded());
                let d = t.final_state().unwrap().u.as_field().l2_distance(&uref).unwrap();
                ds.push((eps, d));
                println!("eps={eps}: d={d:.6e}");
            }
            for w in ds.windows(2) {
                println!("ratio {} -> {}: {:.4}", w[0].0, w[1].0, w[1].1 / w[0].1);
            }
        }
        "c8" => {
            // Criterion 8 calibration at high resolution, per the frozen-C
            // procedure, plus the N=256 acceptance runs.
            for (n, dt, alpha, t_long) in [
                (512usize, 2.5e-5f64, 0.5f64, 10.0f64),
                (256, 1e-4, 0.5, 10.0),
                (256, 1e-4, 1.5, 10.0),
            ] {
                let t0 = std::time::Instant::now();
                let state = profile(n, alpha);
                let u0 = &state.u;
                let h1_sq = u0.as_field().norm_sq_field().integrate()
                    + u0.as_field().gradient_norm_sq().integrate();
                let tau0_sq = {
                    let tau = spinflow::geometry::tension_field(u0);
                    tau.as_field().norm_sq_field().integrate()
                };
                let traj = advance(&state, &midpoint(dt, 0.0), t_long, 1000).unwrap();
                assert!(traj.succeeded(), "{:?}", traj.failure);
                let mut sup = 0.0f64;
                let mut h2_max_early = 0.0f64;
                let mut h2_max = 0.0f64;
                for s in &traj.samples {
                    let u = &s.state.u;
                    let lap = u.as_field().laplacian_neumann();
                    let uxx = lap.norm_sq_field().integrate();
                    let ut = spinflow::geometry::schrodinger_rhs(u)
                        .as_field()
                        .norm_sq_field()
                        .integrate();
                    sup = sup.max(uxx + ut);
                    let h2 = s.record.sobolev[1];
                    if s.state.t <= 1.0 {
                        h2_max_early = h2_max_early.max(h2);
                    }
                    h2_max = h2_max.max(h2);
                }
                let ratio = (sup - tau0_sq) / (h1_sq + 1.0).powi(3);
                println!(
                    "N={n} alpha={alpha}: sup={sup:.4} tau0_sq={tau0_sq:.4} h1_sq={h1_sq:.4} \
                     ratio={ratio:.4} (frozen C={GLOBAL_BOUND_C}) h2_flatness={:.6} [{:.1?}]",
                    h2_max / h2_max_early,
                    t0.elapsed()
                );
            }
        }
        "c9" => {
            // Criterion 9: cross-scheme distance at T = 1.
            let t0 = std::time::Instant::now();
            let state = profile(256, 0.5);
            let mp = advance(&state, &midpoint(1e-4, 0.0), 1.0, 10000).unwrap();
            let mut rk = FlowParams::new(Scheme::Rk4Projected, 0.0, 1e-5);
            rk.override_cfl = true;
            let rk4 = advance(&state, &rk, 1.0, 100000).unwrap();
            assert!(mp.succeeded() && rk4.succeeded(), "{:?} {:?}", mp.failure, rk4.failure);
            let d = mp
                .final_state()
                .unwrap()
                .u
                .as_field()
                .l2_distance(rk4.final_state().unwrap().u.as_field())
                .unwrap();
            println!("cross-scheme distance = {d:.6e} [{:.1?}]", t0.elapsed());
            let sv = rk4.records().map(|r| r.sphere_violation).fold(0.0, f64::max);
            println!("rk4 max sphere violation = {sv:.3e}");
        }
        "iters" => {
            // Midpoint sweep counts at the acceptance parameters.
            let state = profile(256, 0.5);
            let p = midpoint(1e-4, 0.0);
            let mut s = state;
            for k in 0..5 {
                let (next, iters) = spinflow::integrators::step_implicit_midpoint(&s, &p).unwrap();
                println!("step {k}: {iters} sweeps");
                s = next;
            }
        }
        other => eprintln!("unknown probe {other}"),
    }
}
