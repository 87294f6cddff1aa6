//! Register machine interpreter against the text-level oracle interpreter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snp::chooser::Chooser;
use snp::regmachine::{parse_machine, render_machine, run_generate};
use snp_testkit::gen::random_machine_text;
use snp_testkit::oracle::interpret_machine_text;

#[test]
fn generated_machines_agree_with_text_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
    for i in 0..60 {
        let src = random_machine_text(&mut rng, 8);
        let machine = parse_machine(&src).unwrap_or_else(|e| panic!("machine {i}: {e}\n{src}"));
        let ours = run_generate(&machine, 10_000, &mut Chooser::first_declared()).unwrap();
        let oracle = interpret_machine_text(&src, 10_000).unwrap();
        assert_eq!(ours, oracle, "divergence on machine {i}:\n{src}");
    }
}

#[test]
fn generated_machines_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
    for _ in 0..40 {
        let src = random_machine_text(&mut rng, 8);
        let machine = parse_machine(&src).unwrap();
        assert_eq!(parse_machine(&render_machine(&machine)).unwrap(), machine);
    }
}

#[test]
fn steps_advance_one_at_a_time() {
    let src = "l0: ADD 1 l1\nl1: SUB 1 l2 l2\nl2: SUB 1 l0 lh\nlh: HALT\n";
    let machine = parse_machine(src).unwrap();
    let mut state = machine.fresh_state();
    let mut chooser = Chooser::first_declared();
    for expected in 1..=6u64 {
        if state.is_halted(&machine) {
            break;
        }
        snp::regmachine::step_machine(&machine, &mut state, &mut chooser).unwrap();
        assert_eq!(state.steps, expected);
    }
}
