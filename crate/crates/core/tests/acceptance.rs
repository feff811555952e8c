//! Acceptance suite: every check of the library's verification contract,
//! one test per criterion, each printing its pass/fail line.

use hyplap::verify::{run_check, CheckOutcome};

fn assert_check(id: usize) {
    let outcome: CheckOutcome = run_check(id, false, 0xA11CE);
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn c01_special_function_oracle() {
    assert_check(1);
}

#[test]
fn c02_heat_kernel_mass() {
    assert_check(2);
}

#[test]
fn c03_heat_equation_residual() {
    assert_check(3);
}

#[test]
fn c04_time_integral_identity() {
    assert_check(4);
}

#[test]
fn c05_kernel_asymptotics() {
    assert_check(5);
}

#[test]
fn c06_n3_closed_form_kernel() {
    assert_check(6);
}

#[test]
fn c07_poisson_normalization_and_dual_path() {
    assert_check(7);
}

#[test]
fn c08_three_representation_agreement() {
    assert_check(8);
}

#[test]
fn c09_moment_and_tail_limits() {
    assert_check(9);
}

#[test]
fn c10_convergence_to_p_laplacian() {
    assert_check(10);
}

#[test]
fn c11_isometry_equivariance() {
    assert_check(11);
}

#[test]
fn c12_near_field_scaling_bound() {
    assert_check(12);
}
