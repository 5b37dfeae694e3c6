//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion failed. Runs without the libtest harness so the
//! table is always shown.

mod common;

use std::process::Command;
use std::time::Instant;

use common::*;
use gtattr::equivalence::{
    demonstrate_prop1, demonstrate_prop3, random_stack, random_stochastic, verify_prop2, TrialShape,
};
use gtattr::flow::{
    attention_flow_values, build_network, load_attention, max_flow, AttentionStack, FlowOptions,
    InputPlayers, SinkMode,
};
use gtattr::game::{load_game, make_unanimity_game, Coalition, MissingEntries};
use gtattr::report::AttributionReport;
use gtattr::shapley::{
    check_additivity, check_null_player, check_symmetry, exact_shapley, monte_carlo_shapley,
    EstimatorConfig,
};
use rand::Rng;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn flow_shapley_equivalence() -> Outcome {
    let start = Instant::now();
    let shape = TrialShape::new(2..=6, 1..=4);
    let verdict = verify_prop2(100, &shape, 2024).unwrap();
    // the same comparison against the ordering-average oracle
    let mut r = rng(77);
    let mut oracle_gap = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(2..=6);
        let depth = r.random_range(1..=4);
        let stack = random_stack(n, depth, &mut r);
        let net = build_network(&stack, &InputPlayers::all(n), &FlowOptions::default()).unwrap();
        let res = max_flow(&net);
        let phi = permutation_shapley(n, |s| {
            Coalition::from_bits(s).iter().map(|i| res.outflow[i]).sum()
        });
        oracle_gap = oracle_gap.max(max_abs_diff(&phi, &res.outflow));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "attention flow = Shapley of restriction payoff (100 stacks, 1e-8)",
        verdict.holds && verdict.max_abs_gap <= 1e-8 && oracle_gap <= 1e-8 && secs < 60.0,
        format!(
            "max gap {:.2e}, oracle gap {:.2e}, {secs:.1}s",
            verdict.max_abs_gap, oracle_gap
        ),
    )
}

fn axiom_suite() -> Outcome {
    let mut r = rng(5);
    let mut violations = 0usize;
    let mut premises = 0usize;
    for _ in 0..200 {
        let n = r.random_range(2..=8);
        let mut table = random_table(&mut r, n);
        if n >= 3 && r.random_bool(0.5) {
            plant_symmetric(&mut table, 0, 1);
        }
        if r.random_bool(0.5) {
            plant_null(&mut table, n - 1);
        }
        let game = table_game(n, &table);
        let report = exact_shapley(&game).unwrap();
        if !report.is_efficient(1e-9) {
            violations += 1;
        }
        for i in 0..n {
            let v = check_null_player(&game, i, &report).unwrap();
            premises += usize::from(v.premise);
            violations += usize::from(v.violated());
            for j in i + 1..n {
                let v = check_symmetry(&game, i, j, &report).unwrap();
                premises += usize::from(v.premise);
                violations += usize::from(v.violated());
            }
        }
        let other = table_game(n, &random_table(&mut r, n));
        violations += usize::from(!check_additivity(&game, &other).unwrap().holds);
    }
    outcome(
        "axioms hold on 200 random games (n 2..8)",
        violations == 0 && premises > 0,
        format!("{violations} violations, {premises} premises exercised"),
    )
}

fn ordering_vs_coalition_form() -> Outcome {
    let mut r = rng(6);
    let mut gap = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(1..=6);
        let table = random_table(&mut r, n);
        let exact = exact_shapley(&table_game(n, &table)).unwrap();
        let oracle = permutation_shapley(n, |s| table[s as usize]);
        gap = gap.max(max_abs_diff(&exact.values, &oracle));
    }
    outcome(
        "ordering average = coalition-weighted sum (50 games, 1e-10)",
        gap <= 1e-10,
        format!("max gap {gap:.2e}"),
    )
}

fn monte_carlo_convergence() -> Outcome {
    let n = 8;
    let table = random_table(&mut rng(8), n);
    let game = table_game(n, &table);
    let exact = permutation_shapley(n, |s| table[s as usize]);
    let seed = 31;
    let big = monte_carlo_shapley(&game, &EstimatorConfig::new(50_000, seed)).unwrap();
    let se = big.stderr.clone().unwrap();
    let worst_z = (0..n)
        .map(|i| (big.values[i] - exact[i]).abs() / se[i])
        .fold(0.0, f64::max);
    let mean_se = |m: u64| {
        let r = monte_carlo_shapley(&game, &EstimatorConfig::new(m, seed)).unwrap();
        let s = r.stderr.unwrap();
        s.iter().sum::<f64>() / s.len() as f64
    };
    let s1 = mean_se(1_000);
    let s4 = mean_se(4_000);
    let s16 = mean_se(16_000);
    // quadrupling m should halve the error, within a factor of 2
    let ratios = [s1 / s4, s4 / s16];
    let scaling = ratios.iter().all(|&q| (1.0..=4.0).contains(&q));
    outcome(
        "sampled Shapley converges (n=8, m=50000, 3 stderr; 1/sqrt(m) scaling)",
        worst_z <= 3.0 && scaling,
        format!(
            "worst |error|/stderr {worst_z:.2}, stderr ratios {:.3} {:.3}",
            ratios[0], ratios[1]
        ),
    )
}

fn max_flow_correctness() -> Outcome {
    let mut r = rng(9);
    let mut worst_invariant = 0.0f64;
    let mut worst_cut = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut worst_single = 0.0f64;
    let mut single_layer = 0usize;
    for _ in 0..500 {
        let n = r.random_range(1..=8);
        let depth = r.random_range(1..=5);
        let layers = random_layers(&mut r, n, depth);
        let stack = AttentionStack::from_rows(&layers).unwrap();
        let sink = if r.random_bool(0.25) {
            SinkMode::Target(r.random_range(0..n))
        } else {
            SinkMode::Full
        };
        let net = build_network(
            &stack,
            &InputPlayers::all(n),
            &FlowOptions::default().with_sink(sink),
        )
        .unwrap();
        let res = max_flow(&net);
        worst_invariant = worst_invariant
            .max(res.capacity_violation(&net))
            .max(res.conservation_defect(&net));
        worst_cut = worst_cut.max((res.cut_capacity - res.total).abs());
        let arcs: Vec<_> = net
            .arcs()
            .iter()
            .map(|a| (a.from, a.to, a.capacity))
            .collect();
        worst_oracle =
            worst_oracle.max((edmonds_karp(net.node_count(), &arcs, 0, 1) - res.total).abs());
        if depth == 1 && sink == SinkMode::Full {
            single_layer += 1;
            worst_single = worst_single.max(max_abs_diff(&res.outflow, &column_sums(&layers[0])));
        }
    }
    outcome(
        "max flow invariants, cut = flow, single layer = column sums (500 networks)",
        worst_invariant <= 1e-9
            && worst_cut <= 1e-9
            && worst_oracle <= 1e-9
            && worst_single <= 1e-12
            && single_layer > 0,
        format!(
            "invariants {worst_invariant:.1e}, cut {worst_cut:.1e}, oracle {worst_oracle:.1e}, \
             column sums {worst_single:.1e} over {single_layer} single-layer networks"
        ),
    )
}

fn attention_weights_are_not_shapley() -> Outcome {
    let mut r = rng(10);
    let mut flagged = 0usize;
    let mut eligible = 0usize;
    let mut shapley_off = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(2..=6);
        let layer = random_stochastic(n, &mut r);
        let received = column_sums(&layer.rows());
        let spread = received.iter().cloned().fold(f64::MIN, f64::max)
            - received.iter().cloned().fold(f64::MAX, f64::min);
        let stack = AttentionStack::new(vec![layer]).unwrap();
        let verdict = demonstrate_prop1(&stack).unwrap();
        let phi = verdict.witness.series("shapley").unwrap();
        shapley_off = shapley_off.max(max_abs_diff(phi, &vec![1.0; n]));
        if spread > 1e-9 {
            eligible += 1;
            flagged += usize::from(verdict.holds && max_abs_diff(phi, &received) > 1e-9);
        }
    }
    outcome(
        "attention received differs from Shapley (1 per attender) in every trial",
        eligible == 100 && flagged == 100 && shapley_off <= 1e-12,
        format!("flagged {flagged}/{eligible}, max |phi - 1| {shapley_off:.1e}"),
    )
}

fn leave_one_out_is_not_shapley() -> Outcome {
    let unanimity = make_unanimity_game(3, Coalition::full(3)).unwrap();
    let u = demonstrate_prop3(&unanimity).unwrap();
    let third = 1.0 / 3.0;
    let unanimity_ok = u.witness.series("loo").unwrap() == [1.0, 1.0, 1.0]
        && max_abs_diff(u.witness.series("shapley").unwrap(), &[third; 3]) <= 1e-15;

    let twins = load_game(fixture("twin_critical.json"), MissingEntries::Reject).unwrap();
    let t = demonstrate_prop3(&twins).unwrap();
    let twins_ok = t.witness.series("loo").unwrap() == [0.0, 0.0]
        && t.witness.series("shapley").unwrap() == [0.5, 0.5];

    let mut r = rng(12);
    let mut residual = 0.0f64;
    for _ in 0..60 {
        let n = r.random_range(1..=6);
        let game = table_game(n, &random_table(&mut r, n));
        let v = demonstrate_prop3(&game).unwrap();
        residual = residual.max(v.witness.scalars["decomposition_residual"]);
    }
    outcome(
        "leave-one-out differs from Shapley; decomposition within 1e-10 (n <= 6)",
        unanimity_ok && twins_ok && u.holds && t.holds && residual <= 1e-10,
        format!(
            "unanimity {unanimity_ok}, twins {twins_ok}, decomposition residual {residual:.1e}"
        ),
    )
}

fn cli_determinism_and_fixtures() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_gtattr");
    let runs: Vec<Vec<String>> = vec![
        vec![
            "flow".into(),
            "--input".into(),
            fixture("three_by_three.json").display().to_string(),
        ],
        vec![
            "shapley".into(),
            "--input".into(),
            fixture("game3.json").display().to_string(),
            "--samples".into(),
            "1000".into(),
            "--seed".into(),
            "3".into(),
        ],
        vec![
            "shapley".into(),
            "--input".into(),
            fixture("bottleneck.json").display().to_string(),
            "--payoff".into(),
            "flow-recomputed".into(),
            "--exact".into(),
        ],
        vec![
            "loo".into(),
            "--input".into(),
            fixture("twin_critical.json").display().to_string(),
        ],
    ];
    let mut identical = 0usize;
    for args in &runs {
        let payload = || {
            let out = Command::new(exe)
                .args(args)
                .env_remove("GTATTR_SEED")
                .output()
                .unwrap();
            assert!(out.status.success(), "{args:?}");
            AttributionReport::from_json(&String::from_utf8(out.stdout).unwrap())
                .unwrap()
                .payload_json()
                .unwrap()
        };
        identical += usize::from(payload() == payload());
    }
    let mut round_trips = 0usize;
    let attention = [
        "two_token.json",
        "identity3.json",
        "three_by_three.json",
        "bottleneck.json",
        "extractor_sample.json",
    ];
    for name in attention {
        let stack = load_attention(fixture(name)).unwrap();
        let again = AttentionStack::from_json(&stack.to_json().unwrap()).unwrap();
        round_trips += usize::from(again == stack);
        let report = attention_flow_values(
            &stack,
            &InputPlayers::all(stack.n()),
            &FlowOptions::default(),
        )
        .unwrap();
        round_trips += usize::from(
            AttributionReport::from_json(&report.to_json().unwrap()).unwrap() == report,
        );
    }
    let games = ["game3.json", "twin_critical.json"];
    for name in games {
        let game = load_game(fixture(name), MissingEntries::Reject).unwrap();
        let report = exact_shapley(&game).unwrap();
        round_trips += usize::from(
            AttributionReport::from_json(&report.to_json().unwrap()).unwrap() == report,
        );
    }
    let golden = AttributionReport::from_json(
        &std::fs::read_to_string(fixture("game3_shapley.json")).unwrap(),
    );
    round_trips += usize::from(golden.is_ok());
    let expected = 2 * attention.len() + games.len() + 1;
    outcome(
        "CLI runs are byte-identical; fixtures load and round-trip",
        identical == runs.len() && round_trips == expected,
        format!(
            "{identical}/{} identical, {round_trips}/{expected} round trips",
            runs.len()
        ),
    )
}

fn main() {
    let outcomes = [
        flow_shapley_equivalence(),
        axiom_suite(),
        ordering_vs_coalition_form(),
        monte_carlo_convergence(),
        max_flow_correctness(),
        attention_weights_are_not_shapley(),
        leave_one_out_is_not_shapley(),
        cli_determinism_and_fixtures(),
    ];
    println!("acceptance criteria");
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
