use rand::Rng;

use super::{Candidate, Func, Term, Var};
use crate::problem::Problem;

fn count_expandable(t: &Term) -> usize {
    let own = usize::from(matches!(t, Term::App(Func::Loop(..), _)));
    own + t.children().into_iter().map(count_expandable).sum::<usize>()
}

/// Replaces the `n`-th expandable application (pre-order) by its unfolded
/// definition. Returns the remaining count if the target is not in `t`.
fn expand_nth(t: &mut Term, n: usize, problem: &Problem) -> Result<(), usize> {
    let mut n = n;
    if let Term::App(f @ Func::Loop(..), args) = t {
        if n == 0 {
            let def = problem.definition(*f).expect("resolved function");
            let args = args.clone();
            *t = def
                .body
                .subst(&|v: Var| def.params.iter().position(|p| *p == v).map(|i| args[i].clone()));
            return Ok(());
        }
        n -= 1;
    }
    for c in t.children_mut() {
        match expand_nth(c, n, problem) {
            Ok(()) => return Ok(()),
            Err(rest) => n = rest,
        }
    }
    Err(n)
}

/// Unfolds `times` randomly chosen loop-related applications by one step
/// of their defining equations. Stops early if nothing is left to expand.
pub fn expand_definitions<R: Rng>(candidate: &Candidate, problem: &Problem, times: usize, rng: &mut R) -> Candidate {
    let mut out = candidate.clone();
    for _ in 0..times {
        let total: usize = out.0.iter().flat_map(|f| f.terms()).map(count_expandable).sum();
        if total == 0 {
            break;
        }
        let mut n = rng.gen_range(0..total);
        'find: for f in out.0.iter_mut() {
            for t in f.terms_mut() {
                match expand_nth(t, n, problem) {
                    Ok(()) => break 'find,
                    Err(rest) => n = rest,
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::parse_candidate;
    use crate::problem::Semantics;
    use crate::program::{parse_program, EvalLimits};
    use num_bigint::BigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expansion_preserves_meaning() {
        let p = Problem::new(
            "A",
            parse_program("loop(X + Y, X, 0)").unwrap(),
            parse_program("(X * X + X) div 2").unwrap(),
        );
        let c = parse_candidate("(= (+ (* x x) x) (* 2 (v0 x))) | (<= (u0 x 1) (v0 (+ x 1)))").unwrap();
        let sem = Semantics::new(&p, EvalLimits::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for times in 1..=3 {
            for _ in 0..10 {
                let e = expand_definitions(&c, &p, times, &mut rng);
                assert_ne!(e, c);
                for (a, b) in c.0.iter().zip(&e.0) {
                    for x in -3..8i64 {
                        for y in -2..3i64 {
                            let (x, y) = (BigInt::from(x), BigInt::from(y));
                            assert_eq!(sem.holds(a, &x, &y), sem.holds(b, &x, &y), "{b}");
                        }
                    }
                }
            }
        }
        let once = expand_definitions(&parse_candidate("(= (v0 x) x)").unwrap(), &p, 1, &mut rng);
        assert_eq!(once.to_string(), "(= (u0 (g0 x) h0) x)");
    }

    #[test]
    fn nothing_to_expand() {
        let p = Problem::new("B", parse_program("X").unwrap(), parse_program("X").unwrap());
        let c = parse_candidate("(= (small x) (fast x))").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(expand_definitions(&c, &p, 2, &mut rng), c);
    }
}
