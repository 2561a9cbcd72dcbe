use eegalign_core::diffcore::{finite_difference_check, op_cases};

#[test]
fn every_op_matches_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        for case in op_cases(seed) {
            let report = finite_difference_check(&case.inputs, 1e-5, |g, ids| {
                let out = g.apply(case.kind.clone(), ids)?;
                let w = g.input(case.weight.clone());
                let prod = g.mul(out, w)?;
                g.sum(prod)
            })
            .unwrap();
            assert!(
                report.max_rel_error < 1e-4,
                "{} seed {seed}: rel error {:.3e}",
                case.name,
                report.max_rel_error
            );
            worst = worst.max(report.max_rel_error);
        }
    }
    eprintln!("worst relative gradient error: {worst:.3e}");
}

#[test]
fn every_loss_matches_finite_differences() {
    for seed in 0..20 {
        for (name, report) in eegalign_core::losses::gradient_checks(seed).unwrap() {
            assert!(
                report.max_rel_error < 1e-4,
                "{name} seed {seed}: rel error {:.3e}",
                report.max_rel_error
            );
        }
    }
}
