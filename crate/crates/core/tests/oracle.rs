mod common;

use common::{oracle_replan, oracle_solve, random_instance, random_update, REPLAN_SHAPE, SOLVER_SHAPE};
use forecrew::model::{apply_deltas, ProblemInstance};
use forecrew::replan::ReplanError;
use forecrew::solver::SolveLimits;
use forecrew::{build_program, replan, solve, verify_plan, ReplanContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve_objective(inst: &ProblemInstance) -> Option<i64> {
    let program = build_program(inst).unwrap();
    let (plan, _) = solve(&program, &SolveLimits::default()).unwrap();
    if !plan.status.is_feasible() {
        return None;
    }
    assert!(verify_plan(inst, &plan).is_empty(), "{}", verify_plan(inst, &plan));
    assert_eq!(program.evaluate(&plan), Ok(plan.objective));
    Some(plan.objective)
}

#[test]
fn solver_matches_enumeration_on_small_instances() {
    let mut feasible = 0;
    let mut sizes = [0usize; 6];
    for seed in 0..250 {
        let inst = random_instance(seed, &SOLVER_SHAPE);
        let got = solve_objective(&inst);
        assert_eq!(got, oracle_solve(&inst), "seed {seed}: {inst:#?}");
        feasible += usize::from(got.is_some());
        sizes[inst.tasks.len()] += 1;
    }
    eprintln!("feasible {feasible}, task counts {sizes:?}");
    assert!(feasible >= 200);
}

#[test]
fn replan_matches_enumeration_on_small_instances() {
    let mut compared = 0;
    let mut changed = 0;
    for seed in 0..250u64 {
        let inst = random_instance(seed, &REPLAN_SHAPE);
        let (original, _) = solve(&build_program(&inst).unwrap(), &SolveLimits::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let at = rng.gen_range(0..=original.makespan / 2);
        let (_, future) = forecrew::split_tasks(&original, at);
        let deltas = random_update(&inst, &future, &mut rng);
        let updated = apply_deltas(&inst, &deltas).unwrap();
        let horizon = updated.default_horizon() + at;
        let expected = oracle_replan(&updated, &original, at, horizon);
        match replan(&ReplanContext::new(original.clone(), at, updated.clone()), &SolveLimits::default()) {
            Ok((plan, _)) => {
                assert!(verify_plan(&updated, &plan).is_empty(), "seed {seed}");
                assert_eq!(Some(plan.objective), expected, "seed {seed} at {at} {deltas:?}\n{inst:#?}\n{original:#?}\n{plan:#?}");
                compared += 1;
                changed += usize::from(plan.entries != original.entries);
            }
            Err(ReplanError::FrozenInfeasible { .. }) => {}
            Err(ReplanError::Infeasible { .. }) => assert_eq!(expected, None, "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    eprintln!("compared {compared}, changed {changed}");
    assert!(compared >= 200, "only {compared} comparisons");
}
