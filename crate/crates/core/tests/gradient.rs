//! Finite-difference check of the hand-written backward pass.

mod support;

use std::time::Instant;

#[test]
fn backward_matches_central_differences() {
    let t0 = Instant::now();
    let worst = support::gradient_check(100);
    println!("worst relative error per layer kind {worst:?}");
    assert_eq!(worst.len(), 4);
    for (kind, err) in worst {
        assert!(err < 1e-4, "{kind:?}: relative error {err:e}");
    }
    assert!(t0.elapsed().as_secs() < 60);
}
