//! Randomized cross-module invariants on generator-built grids. These run on
//! smaller ensembles than the acceptance gate and aim at relationships
//! between modules rather than any single module's contract.

mod common;

use common::{random_disturbance, random_grid, seeded_rng, GridParams};
use rocof_core::grid::{parse_grid, serialize_grid, validate_grid};
use rocof_core::rocof::{
    assemble_and_certify, distribute_impact, nodal_rocof_report, screen_contingencies,
    ContingencySet,
};
use rocof_core::dispatch::{dispatch, DispatchOutcome};

#[test]
fn random_grids_validate_and_round_trip() {
    let mut rng = seeded_rng(101);
    let params = GridParams::structural();
    for _ in 0..50 {
        let grid = random_grid(&mut rng, &params);
        let report = validate_grid(&grid);
        assert!(report.ok(), "generator must build valid grids:\n{}", report.render());
        let round = parse_grid(&serialize_grid(&grid)).expect("serialized grid must parse");
        assert_eq!(grid, round);
    }
}

#[test]
fn assembled_blocks_form_a_laplacian() {
    let mut rng = seeded_rng(102);
    let params = GridParams::structural();
    for _ in 0..30 {
        let grid = random_grid(&mut rng, &params);
        let blocks = assemble_and_certify(&grid).unwrap();
        assert_eq!(
            blocks.b_bg(),
            &blocks.b_gb().transpose(),
            "coupling blocks must be exact transposes"
        );
        let full = blocks.full_matrix();
        for r in 0..full.nrows() {
            let sum: f64 = full.row(r).iter().sum();
            assert!(sum.abs() <= 1e-10, "row {r} sums to {sum}");
        }
    }
}

#[test]
fn impact_shares_are_non_negative_and_conserved() {
    let mut rng = seeded_rng(103);
    let params = GridParams::structural();
    for _ in 0..30 {
        let grid = random_grid(&mut rng, &params);
        let blocks = assemble_and_certify(&grid).unwrap();
        for _ in 0..3 {
            let d = random_disturbance(&mut rng, &grid, 1.0..=1000.0);
            let impact = distribute_impact(&grid, &blocks, &d).unwrap();
            for (i, &share) in impact.delta_pg_mw.iter().enumerate() {
                assert!(share >= -1e-9, "machine {i} share {share} MW negative");
            }
            let sum: f64 = impact.delta_pg_mw.iter().sum();
            assert!((sum - d.p_dis_mw).abs() <= 1e-6);
        }
    }
}

#[test]
fn screening_matches_individual_reports_exactly() {
    let mut rng = seeded_rng(104);
    let params = GridParams::oracle();
    for _ in 0..10 {
        let grid = random_grid(&mut rng, &params);
        let screened =
            screen_contingencies(&grid, &ContingencySet::AllLoadBuses { p_dis_mw: 75.0 })
                .unwrap();
        assert_eq!(screened.reports.len(), grid.load_buses.len());
        for (report, bus) in screened.reports.iter().zip(&grid.load_buses) {
            assert_eq!(&report.disturbance.bus, bus, "reports must keep input order");
            let solo = nodal_rocof_report(&grid, &report.disturbance).unwrap();
            // The parallel path runs the same arithmetic, so agreement must
            // be bitwise, not approximate.
            assert_eq!(report.gen_rocof_hz_per_s, solo.gen_rocof_hz_per_s);
            assert_eq!(report.load_rocof_hz_per_s, solo.load_rocof_hz_per_s);
            assert_eq!(report.worst_bus, solo.worst_bus);
        }
    }
}

#[test]
fn load_bus_rocof_never_escapes_the_machine_range() {
    let mut rng = seeded_rng(105);
    let params = GridParams::structural();
    for _ in 0..40 {
        let grid = random_grid(&mut rng, &params);
        let d = random_disturbance(&mut rng, &grid, 1.0..=1000.0);
        let report = nodal_rocof_report(&grid, &d).unwrap();
        let lo = report
            .gen_rocof_hz_per_s
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = report
            .gen_rocof_hz_per_s
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for (b, &r) in report.load_rocof_hz_per_s.iter().enumerate() {
            assert!(
                lo - 1e-9 <= r && r <= hi + 1e-9,
                "load bus {b} at {r} Hz/s escapes machine range [{lo}, {hi}]"
            );
        }
    }
}

#[test]
fn dispatch_awards_respect_bounds_and_prices_are_non_negative() {
    let mut rng = seeded_rng(106);
    let params = GridParams::oracle();
    let mut optimal_seen = 0;
    for _ in 0..15 {
        let grid = random_grid(&mut rng, &params);
        let set = ContingencySet::AllLoadBuses { p_dis_mw: 120.0 };

        // A cap 5% above the tightest per-machine requirement keeps the LP
        // feasible while leaving some rows binding.
        let screened = screen_contingencies(&grid, &set).unwrap();
        let r_min = screened
            .summary
            .iter()
            .enumerate()
            .map(|(i, s)| {
                grid.f0_hz * s.max_abs_delta_pg_mw / (2.0 * grid.generators[i].h_max_mws)
            })
            .fold(0.0_f64, f64::max);
        let cap = 1.05 * r_min;

        match dispatch(&grid, &set, cap).unwrap() {
            DispatchOutcome::Optimal(sol) => {
                optimal_seen += 1;
                for (i, gen) in grid.generators.iter().enumerate() {
                    let headroom = gen.h_max_mws - gen.h0_mws;
                    assert!(
                        (-1e-9..=headroom + 1e-9).contains(&sol.h_v_mws[i]),
                        "award {} outside [0, {headroom}]",
                        sol.h_v_mws[i]
                    );
                    assert!(sol.prices_per_mws[i] >= -1e-12);
                }
                assert!(sol.kkt.within(1e-7));
            }
            DispatchOutcome::Infeasible(e) => {
                panic!("cap chosen feasible by construction: {e:?}")
            }
        }
    }
    assert!(optimal_seen == 15);
}
