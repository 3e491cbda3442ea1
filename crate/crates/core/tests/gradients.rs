mod common;

use common::gradcheck::{discriminator_groups, masknet_groups};

#[test]
fn mask_network_gradients_match_finite_differences() {
    let groups = masknet_groups(6, 11);
    assert!(groups.iter().any(|g| g.name == "sigmoid.alpha"));
    assert!(groups.iter().any(|g| g.name == "sigmoid.beta"));
    for g in &groups {
        println!("{:<32} {:.2e} ({} entries)", g.name, g.max_rel_err, g.checked);
        assert!(g.max_rel_err < 1e-3, "{} rel err {}", g.name, g.max_rel_err);
    }
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    for g in &discriminator_groups(6, 12) {
        println!("{:<32} {:.2e} ({} entries)", g.name, g.max_rel_err, g.checked);
        assert!(g.max_rel_err < 1e-3, "{} rel err {}", g.name, g.max_rel_err);
    }
}
