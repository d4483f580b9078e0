mod common;

use common::{grad_check, random_instance, Kind, FD_TOLERANCE, KINDS, MODES};
use linksage::gnn::{loss_cross_entropy_masked, AggregationMode, Batch, Matrix};

#[test]
fn analytic_gradients_match_central_differences() {
    for kind in KINDS {
        for mode in MODES {
            for seed in 0..20 {
                let c = grad_check(seed, kind, mode);
                assert!(
                    c.max_rel_err < FD_TOLERANCE && c.max_rel_err_fine < FD_TOLERANCE,
                    "{kind:?}/{mode:?} seed {seed}: relative error {:.3e} (fine step {:.3e}) over {} params",
                    c.max_rel_err,
                    c.max_rel_err_fine,
                    c.params
                );
            }
        }
    }
}

#[test]
fn duplicated_pair_doubles_its_gradient() {
    let inst = random_instance(7, Kind::Dot, AggregationMode::Attention);
    let b = Batch::new(
        vec![inst.batch.members[0].clone()],
        vec![inst.batch.jobs[0].clone()],
        linksage::gnn::LabelMatrix::from_vec(1, 1, vec![1]).unwrap(),
    )
    .unwrap();
    let twice = Batch::new(
        vec![b.members[0].clone(); 2],
        vec![b.jobs[0].clone()],
        linksage::gnn::LabelMatrix::from_vec(2, 1, vec![1, 1]).unwrap(),
    )
    .unwrap();
    let grads = |batch: &Batch| {
        let st = inst.model.forward(batch).unwrap();
        let (_, d) = loss_cross_entropy_masked(&st.scores, &batch.labels, None).unwrap();
        inst.model.backward(batch, &st, &d).unwrap()
    };
    let one = grads(&b).encoder.flatten();
    let two = grads(&twice).encoder.flatten();
    for (a, b) in one.iter().zip(&two) {
        assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn zero_upstream_gives_zero_gradients_for_every_kind() {
    for kind in KINDS {
        for mode in MODES {
            let inst = random_instance(3, kind, mode);
            let st = inst.model.forward(&inst.batch).unwrap();
            let z = Matrix::zeros(inst.batch.members.len(), inst.batch.jobs.len());
            assert!(inst.model.backward(&inst.batch, &st, &z).unwrap().is_zero());
        }
    }
}
