//! Finite-trace semantics read directly off the definitions, random formulas
//! and traces.

use goalscope_core::fixtures;
use goalscope_core::ltlf::{parse_ltlf, Ltl};
use goalscope_core::model::{AtomId, State};
use goalscope_core::session::Mode;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const ATOMS: u32 = 3;

/// Direct reading of the finite-trace semantics at position `i`.
pub fn holds(f: &Ltl, trace: &[State], i: usize) -> bool {
    let n = trace.len();
    match f {
        Ltl::True => true,
        Ltl::False => false,
        Ltl::Atom(a) => trace[i].contains(*a),
        Ltl::Not(g) => !holds(g, trace, i),
        Ltl::And(a, b) => holds(a, trace, i) && holds(b, trace, i),
        Ltl::Or(a, b) => holds(a, trace, i) || holds(b, trace, i),
        Ltl::Next(g) => i + 1 < n && holds(g, trace, i + 1),
        Ltl::WeakNext(g) => i + 1 >= n || holds(g, trace, i + 1),
        Ltl::Eventually(g) => (i..n).any(|j| holds(g, trace, j)),
        Ltl::Always(g) => (i..n).all(|j| holds(g, trace, j)),
        Ltl::Until(a, b) => (i..n).any(|j| holds(b, trace, j) && (i..j).all(|k| holds(a, trace, k))),
    }
}

/// Satisfaction by progressing through every state but the last.
pub fn by_progression(f: &Ltl, trace: &[State]) -> bool {
    let (last, prefix) = trace.split_last().expect("non-empty trace");
    let mut g = f.clone();
    for s in prefix {
        g = g.progress(s);
    }
    g.accepting_if_ends(last)
}

pub fn random_formula(rng: &mut StdRng, depth: usize) -> Ltl {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..8) {
            0 => Ltl::True,
            1 => Ltl::False,
            _ => Ltl::Atom(AtomId(rng.gen_range(0..ATOMS))),
        };
    }
    let op = rng.gen_range(0..9);
    let mut sub = || Box::new(random_formula(rng, depth - 1));
    match op {
        0 => Ltl::Not(sub()),
        1 => Ltl::And(sub(), sub()),
        2 => Ltl::Or(sub(), sub()),
        3 => Ltl::Next(sub()),
        4 => Ltl::WeakNext(sub()),
        5 => Ltl::Eventually(sub()),
        6 => Ltl::Always(sub()),
        _ => Ltl::Until(sub(), sub()),
    }
}

pub fn random_trace(rng: &mut StdRng) -> Vec<State> {
    let len = rng.gen_range(1..=6);
    (0..len)
        .map(|_| State::from_ids(ATOMS as usize, (0..ATOMS).filter(|_| rng.gen_bool(0.5)).map(AtomId)))
        .collect()
}

pub fn name(id: AtomId) -> String {
    format!("p{}", id.0)
}

pub fn resolve(pred: &str, args: &[String]) -> Option<AtomId> {
    let n: u32 = pred.strip_prefix('p')?.parse().ok()?;
    (args.is_empty() && n < ATOMS).then_some(AtomId(n))
}

/// Random formula/trace pairs (depth <= 4, length <= 6) checked against
/// progression and against `Ltl::evaluate`; returns the mismatches.
pub fn progression_mismatches(cases: usize, seed: u64) -> Vec<(usize, String, &'static str)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut mismatches = Vec::new();
    for case in 0..cases {
        let f = random_formula(&mut rng, 4);
        assert!(f.depth() <= 4);
        let trace = random_trace(&mut rng);
        let expected = holds(&f, &trace, 0);
        if by_progression(&f, &trace) != expected {
            mismatches.push((case, f.render(&name), "progression"));
        }
        for i in 0..trace.len() {
            if f.evaluate(&trace, i) != holds(&f, &trace, i) {
                mismatches.push((case, f.render(&name), "evaluate"));
            }
        }
    }
    mismatches
}

/// Prints and re-parses every fixture goal; returns how many were checked.
pub fn fixture_round_trip() -> usize {
    let mut n = 0;
    for fixture in fixtures::ALL {
        let p = fixture.project(Mode::Free).unwrap();
        for (g, f) in p.goals().iter().zip(p.formulas()) {
            let text = f.to_text(&p.task);
            assert_eq!(
                &parse_ltlf(&text, &p.task).unwrap(),
                f,
                "{} in {}: {text}",
                g.id,
                fixture.name
            );
            n += 1;
        }
    }
    n
}
