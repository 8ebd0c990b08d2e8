mod support;

use support::gradient::{run_gradient_check, BATCHES};

#[test]
fn ppo_loss_gradients_match_finite_differences() {
    let r = run_gradient_check();
    println!(
        "max relative error over {} minibatches ({} rejected at kinks): {:.3e}",
        r.checked, r.rejected, r.worst
    );
    assert_eq!(r.checked, BATCHES);
    assert!(r.rejected <= BATCHES / 2, "too many non-smooth draws: {}", r.rejected);
    assert!(r.worst < 1e-4, "max relative error {:e}", r.worst);
}
