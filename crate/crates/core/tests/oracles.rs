use std::path::PathBuf;

use hoistlab::bench::{builtin, random_small, SmallParams};
use hoistlab::formulations::{
    build_model, build_multidegree_model, relax, Encoding, FormulationId, FormulationSpec,
    MultidegreeOptions, DEFECT_PHILLIPS_MULTIFUNCTION,
};
use hoistlab::instance::Instance;
use hoistlab::schedule::{build_trajectory, render_timeway_svg, SvgStyle};
use hoistlab::solver::{solve_multidegree, solve_simple_cycle, Budget, SolveOptions};
use hoistlab_milp::{mip_solve, parse_lp_file, write_lp_file, MipOptions, MipStatus, Model};

use FormulationId::*;

fn mip(model: &Model) -> Option<i64> {
    let r = mip_solve(
        model,
        &MipOptions {
            integral_objective: true,
            ..Default::default()
        },
    )
    .unwrap();
    match r.status {
        MipStatus::Optimal => Some(r.objective.unwrap().round() as i64),
        MipStatus::Infeasible => None,
        s => panic!("unexpected MIP status {s:?}"),
    }
}

fn native(inst: &Instance, restricted: bool) -> Option<i64> {
    let opts = SolveOptions {
        restricted,
        ..SolveOptions::default()
    };
    solve_simple_cycle(inst, &opts, &Budget::default()).objective
}

fn instances(count: u64, max_ops: usize) -> impl Iterator<Item = Instance> {
    let p = SmallParams {
        min_ops: 3,
        max_ops,
        ..SmallParams::default()
    };
    (0..count).map(move |seed| random_small(7000 + seed, &p))
}

#[test]
fn every_encoding_matches_the_native_solver() {
    for inst in instances(40, 6) {
        let free = native(&inst, false);
        let restricted = native(&inst, true);
        for id in FormulationId::ALL {
            let model = build_model(&inst, &FormulationSpec::new(id)).unwrap();
            let want = if id.restricted() { restricted } else { free };
            assert_eq!(mip(&model), want, "{} on {}", id, inst.name);
        }
    }
}

#[test]
fn restricted_formulations_lose_on_ex1() {
    let ex1 = builtin("ex1").unwrap();
    for id in FormulationId::ALL {
        let want = if id.restricted() { 200 } else { 160 };
        assert_eq!(
            mip(&build_model(&ex1, &FormulationSpec::new(id)).unwrap()),
            Some(want),
            "{id}"
        );
    }
}

#[test]
fn strengthened_soak_rows_dominate() {
    let p = SmallParams {
        min_ops: 4,
        max_ops: 7,
        ..SmallParams::default()
    };
    for seed in 0..40 {
        let inst = random_small(9000 + seed, &p);
        let lp = |id| relax(&inst, &FormulationSpec::new(id)).unwrap();
        let (phillips, zhou, liu, imp1, imp2) =
            (lp(Phillips), lp(Zhou), lp(Liu), lp(Imp1), lp(Imp2));
        assert!(imp2 >= liu - 1e-6, "{}: Imp2 {imp2} < Liu {liu}", inst.name);
        assert!(
            imp1 >= zhou - 1e-6,
            "{}: Imp1 {imp1} < Zhou {zhou}",
            inst.name
        );
        assert!(liu >= phillips.max(zhou) - 1e-6, "{}: Liu {liu}", inst.name);
        assert!(
            imp2 >= imp1 - 1e-6,
            "{}: Imp2 {imp2} < Imp1 {imp1}",
            inst.name
        );
    }
}

#[test]
fn multidegree_model_matches_native() {
    let p = SmallParams {
        min_ops: 2,
        max_ops: 4,
        carrier_limits: false,
        ..SmallParams::default()
    };
    for seed in 0..15 {
        let inst = random_small(500 + seed, &p);
        let opts = MultidegreeOptions {
            multifunction: true,
            integer_cycle: true,
            ..Default::default()
        };
        let model = build_multidegree_model(&inst, 2, &opts).unwrap();
        let want = solve_multidegree(&inst, 2, &SolveOptions::default(), &Budget::default())
            .unwrap()
            .objective;
        assert_eq!(mip(&model), want, "{}", inst.name);
    }
}

#[test]
fn exported_models_round_trip() {
    let ex2 = builtin("ex2").unwrap();
    for id in FormulationId::ALL {
        let model = build_model(&ex2, &FormulationSpec::new(id)).unwrap();
        let text = write_lp_file(&model);
        let back = parse_lp_file(&text).unwrap();
        assert_eq!(write_lp_file(&back), text, "{id}");
        assert_eq!(mip(&back), mip(&model), "{id}");
    }
}

#[test]
fn defect_flags_reach_the_exported_file() {
    let ex2 = builtin("ex2").unwrap();
    let spec = FormulationSpec {
        multifunction: Encoding::Faithful,
        ..FormulationSpec::new(Phillips)
    };
    let text = write_lp_file(&build_model(&ex2, &spec).unwrap());
    assert!(text.contains(&format!("\\ defect: {DEFECT_PHILLIPS_MULTIFUNCTION}")));
    assert_eq!(
        parse_lp_file(&text).unwrap().metadata.defects,
        [DEFECT_PHILLIPS_MULTIFUNCTION]
    );
}

#[test]
fn ex1_diagram_matches_golden_file() {
    let ex1 = builtin("ex1").unwrap();
    let sched = solve_simple_cycle(&ex1, &SolveOptions::default(), &Budget::default())
        .schedule
        .unwrap();
    let traj = build_trajectory(&ex1, &sched).unwrap();
    let style = SvgStyle {
        title: Some("ex1".into()),
        ..SvgStyle::default()
    };
    let svg = render_timeway_svg(&ex1, &traj, &style);
    assert_eq!(svg, render_timeway_svg(&ex1, &traj, &style));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ex1.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &svg).unwrap();
    }
    let golden =
        std::fs::read_to_string(&path).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(svg, golden);
}
