use gazeintent::exec::Execution;
use gazeintent::svm::{kkt_audit, train_smo_detailed, Kernel, SvmParams, TrainingExample};
use gazeintent_oracle::{decision, seeded_cases, solve, Case, OracleKernel};
use nalgebra::DMatrix;

fn params_for(case: &Case) -> SvmParams {
    match case.kernel {
        OracleKernel::Linear => SvmParams::linear(case.c),
        OracleKernel::Rbf(g) => SvmParams::rbf(g, case.c),
    }
}

fn examples(case: &Case) -> Vec<TrainingExample> {
    case.x.iter().zip(&case.y).map(|(x, &y)| TrainingExample::new(x.clone(), y > 0.0)).collect()
}

#[test]
fn smo_matches_projected_gradient_oracle() {
    let mut worst_obj: f64 = 0.0;
    for (i, case) in seeded_cases(2024, 50).iter().enumerate() {
        let data = examples(case);
        let (model, sol) = train_smo_detailed(&data, &params_for(case), i as u64, Execution::Sequential).unwrap();
        let oracle = solve(&case.x, &case.y, case.c, case.kernel);
        let gap = (sol.objective - oracle.objective).abs();
        worst_obj = worst_obj.max(gap);
        assert!(gap <= 1e-4, "case {i}: smo {} oracle {}", sol.objective, oracle.objective);
        for p in &case.probes {
            let ours = model.decision_value(p).unwrap() > 0.0;
            let theirs = decision(&oracle, &case.x, &case.y, case.kernel, p) > 0.0;
            assert_eq!(ours, theirs, "case {i}: probe {p:?} classified differently");
        }
        let kkt = kkt_audit(&model, &data, &sol.alphas);
        assert!(kkt.passes(1e-3), "case {i}: {kkt:?}");
    }
    eprintln!("largest objective gap {worst_obj:.2e}");
}

#[test]
fn kernels_are_positive_semidefinite() {
    for case in seeded_cases(77, 50) {
        let kernel = params_for(&case).resolve_kernel(case.x[0].len());
        let n = case.x.len();
        let g = DMatrix::from_fn(n, n, |i, j| kernel.eval(&case.x[i], &case.x[j]));
        assert_eq!(g, g.transpose());
        let scale = g.norm().max(1.0);
        let min = g.symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-9 * scale, "{kernel:?}: min eigenvalue {min}");
    }
}

#[test]
fn oracle_kernels_agree_with_production_kernels() {
    for case in seeded_cases(5, 20) {
        let ours = match case.kernel {
            OracleKernel::Linear => Kernel::Linear,
            OracleKernel::Rbf(gamma) => Kernel::Rbf { gamma },
        };
        for a in &case.x {
            for b in &case.probes[..10] {
                assert!((ours.eval(a, b) - case.kernel.eval(a, b)).abs() < 1e-12);
            }
        }
    }
}
