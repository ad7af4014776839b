#[path = "../examples/ergodic_averages.rs"]
mod ergodic_averages;
#[path = "../examples/kernels.rs"]
mod kernels;
#[path = "../examples/lift_equivalence.rs"]
mod lift_equivalence;
#[path = "../examples/limit_distribution.rs"]
mod limit_distribution;
#[path = "../examples/mittag_leffler.rs"]
mod mittag_leffler;

#[test]
fn examples_run() {
    mittag_leffler::main();
    kernels::main();
    resolvent::main();
    conditions::main();
    lift_equivalence::main();
    ergodic_averages::main();
    limit_distribution::main();
}
