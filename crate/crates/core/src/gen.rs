//! Brute-force initial candidates: enumerate terms up to semantic
//! equivalence on a small grid, then sample literals, predicates and
//! candidates that are true on that grid.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::predicate::{Candidate, Formula, Func, Literal, Rel, Term, Var};
use crate::problem::{Problem, Semantics};
use crate::program::{sml_div, sml_mod, EvalLimits};

pub const GRID_X: std::ops::Range<i64> = 0..10;
pub const GRID_Y: std::ops::Range<i64> = -5..10;
pub const GRID_LEN: usize = 150;

/// Grid points in lexicographic order.
pub fn grid() -> Vec<(i64, i64)> {
    GRID_X.flat_map(|x| GRID_Y.map(move |y| (x, y))).collect()
}

/// One evaluation outcome. Values that fit `i128` are never stored as `Big`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Val {
    Int(i128),
    Big(BigInt),
    Abort,
}

impl Val {
    fn from_big(b: BigInt) -> Val {
        match b.to_i128() {
            Some(i) => Val::Int(i),
            None => Val::Big(b),
        }
    }

    fn big(&self) -> Option<BigInt> {
        match self {
            Val::Int(i) => Some(BigInt::from(*i)),
            Val::Big(b) => Some(b.clone()),
            Val::Abort => None,
        }
    }

    fn cap(self, bits: u64) -> Val {
        match &self {
            Val::Big(b) if b.bits() > bits => Val::Abort,
            _ => self,
        }
    }

    fn binop(&self, other: &Val, op: Op, bits: u64) -> Val {
        if let (Val::Int(a), Val::Int(b)) = (self, other) {
            let fast = match op {
                Op::Add => a.checked_add(*b),
                Op::Sub => a.checked_sub(*b),
                Op::Mul => a.checked_mul(*b),
                Op::Div | Op::Mod if *b == 0 => return Val::Abort,
                Op::Div => a.checked_div_euclid(*b).map(|_| floor_div(*a, *b)),
                Op::Mod => a.checked_rem_euclid(*b).map(|_| a - b * floor_div(*a, *b)),
            };
            if let Some(v) = fast {
                return Val::Int(v);
            }
        }
        let (Some(a), Some(b)) = (self.big(), other.big()) else {
            return Val::Abort;
        };
        let r = match op {
            Op::Add => Some(a + b),
            Op::Sub => Some(a - b),
            Op::Mul => Some(a * b),
            Op::Div => sml_div(&a, &b),
            Op::Mod => sml_mod(&a, &b),
        };
        r.map_or(Val::Abort, |v| Val::from_big(v).cap(bits))
    }

    fn le_zero(&self) -> Option<bool> {
        match self {
            Val::Int(i) => Some(*i <= 0),
            Val::Big(b) => Some(!b.is_positive()),
            Val::Abort => None,
        }
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

/// Stable pseudo-value in `[-2^31, 2^31)` for a loop-function subterm at
/// one grid point.
pub fn opaque_value(seed: u64, subterm: &str, point: usize) -> i64 {
    let mut h = fnv1a(&seed.to_le_bytes(), 0xCBF2_9CE4_8422_2325);
    h = fnv1a(subterm.as_bytes(), h);
    h = fnv1a(&(point as u64).to_le_bytes(), h);
    (splitmix64(h) >> 32) as u32 as i32 as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthMode {
    /// Loop functions take their real values.
    Semantic,
    /// Loop functions take the opaque fingerprint values.
    Opaque,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub term_cap: usize,
    pub literals_per_class: usize,
    pub predicates: usize,
    pub candidates: usize,
    pub candidate_len: usize,
    pub max_draws: usize,
    pub truth: TruthMode,
    /// Magnitude limit (bits) for fingerprint values.
    pub value_bits: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            term_cap: 1024,
            literals_per_class: 250,
            predicates: 4000,
            candidates: 1000,
            candidate_len: 4,
            max_draws: 1_000_000,
            truth: TruthMode::Semantic,
            value_bits: 1024,
        }
    }
}

impl GenConfig {
    /// Desk-scale settings: 256 terms, 200 literals, 800 predicates and
    /// 200 candidates.
    pub fn reduced() -> Self {
        GenConfig {
            term_cap: 256,
            literals_per_class: 50,
            predicates: 800,
            candidates: 200,
            ..GenConfig::default()
        }
    }
}

fn gen_limits() -> EvalLimits {
    EvalLimits::new(300, 20_000, 5_000)
}

/// A pool member with its opaque fingerprint and its real values.
#[derive(Debug, Clone)]
pub struct PoolTerm {
    pub term: Term,
    pub size: usize,
    pub fingerprint: Vec<Val>,
    pub values: Vec<Val>,
}

#[derive(Debug, Clone, Default)]
pub struct TermPool {
    pub terms: Vec<PoolTerm>,
}

struct Ctx<'a> {
    sem: Semantics<'a>,
    seed: u64,
    bits: u64,
    points: Vec<(i64, i64)>,
}

impl<'a> Ctx<'a> {
    fn new(problem: &'a Problem, seed: u64, bits: u64) -> Self {
        Ctx {
            sem: Semantics::new(problem, gen_limits()),
            seed,
            bits,
            points: grid(),
        }
    }

    fn leaf(&self, t: &Term) -> (Vec<Val>, Vec<Val>) {
        let v: Vec<Val> = match t {
            Term::Const(c) => vec![Val::Int(i128::from(*c)); GRID_LEN],
            Term::Var(Var::X) => self.points.iter().map(|p| Val::Int(p.0.into())).collect(),
            Term::Var(_) => self.points.iter().map(|p| Val::Int(p.1.into())).collect(),
            _ => unreachable!(),
        };
        (v.clone(), v)
    }

    fn app(&self, f: Func, t: &Term, args: &[&PoolTerm]) -> (Vec<Val>, Vec<Val>) {
        let text = t.to_smt();
        let fp = (0..GRID_LEN)
            .map(|i| {
                if args.iter().any(|a| a.fingerprint[i] == Val::Abort) {
                    Val::Abort
                } else {
                    Val::Int(opaque_value(self.seed, &text, i).into())
                }
            })
            .collect();
        let vals = (0..GRID_LEN)
            .map(|i| {
                let argv: Option<Vec<BigInt>> = args.iter().map(|a| a.values[i].big()).collect();
                match argv {
                    None => Val::Abort,
                    Some(argv) => match self.sem.apply_func(f, &argv) {
                        Ok(v) => Val::from_big(v).cap(self.bits),
                        Err(_) => Val::Abort,
                    },
                }
            })
            .collect();
        (fp, vals)
    }

    fn combine(&self, t: &Term, kids: &[&PoolTerm]) -> (Vec<Val>, Vec<Val>) {
        let bin = |op: Op| -> (Vec<Val>, Vec<Val>) {
            let f = |sel: fn(&PoolTerm) -> &Vec<Val>| -> Vec<Val> {
                sel(kids[0])
                    .iter()
                    .zip(sel(kids[1]))
                    .map(|(a, b)| a.binop(b, op, self.bits))
                    .collect()
            };
            (f(|p| &p.fingerprint), f(|p| &p.values))
        };
        match t {
            Term::Add(..) => bin(Op::Add),
            Term::Sub(..) => bin(Op::Sub),
            Term::Mul(..) => bin(Op::Mul),
            Term::Div(..) => bin(Op::Div),
            Term::Mod(..) => bin(Op::Mod),
            Term::Ite(..) => {
                let f = |sel: fn(&PoolTerm) -> &Vec<Val>| -> Vec<Val> {
                    (0..GRID_LEN)
                        .map(|i| match sel(kids[0])[i].le_zero() {
                            None => Val::Abort,
                            Some(true) => sel(kids[1])[i].clone(),
                            Some(false) => sel(kids[2])[i].clone(),
                        })
                        .collect()
                };
                (f(|p| &p.fingerprint), f(|p| &p.values))
            }
            Term::App(f, _) => self.app(*f, t, kids),
            _ => self.leaf(t),
        }
    }
}

/// Fingerprint of an arbitrary term (loop-function applications opaque).
pub fn fingerprint(term: &Term, problem: &Problem, seed: u64) -> Vec<Val> {
    let ctx = Ctx::new(problem, seed, GenConfig::default().value_bits);
    fn go(ctx: &Ctx, t: &Term) -> PoolTerm {
        let kids: Vec<PoolTerm> = t.children().into_iter().map(|c| go(ctx, c)).collect();
        let refs: Vec<&PoolTerm> = kids.iter().collect();
        let (fingerprint, values) = ctx.combine(t, &refs);
        PoolTerm {
            term: t.clone(),
            size: t.size(),
            fingerprint,
            values,
        }
    }
    go(&ctx, term).fingerprint
}

/// Function symbols used in enumeration: the loop functions and `s`.
pub fn enumeration_functions(problem: &Problem) -> Vec<(Func, usize)> {
    problem
        .functions()
        .into_iter()
        .filter(|f| matches!(f, Func::Loop(r, _) if r.is_loop_function()))
        .map(|f| (f, problem.arity(f).unwrap()))
        .collect()
}

/// Compositions of `total` into `parts` positive sizes, in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Shape {
    App(Func, usize),
    Bin(u8),
    Ite,
}

fn build(shape: Shape, kids: Vec<Term>) -> Term {
    let mut k = kids.into_iter();
    let mut next = || k.next().unwrap();
    match shape {
        Shape::App(f, n) => Term::App(f, (0..n).map(|_| next()).collect()),
        Shape::Bin(0) => Term::add(next(), next()),
        Shape::Bin(1) => Term::sub(next(), next()),
        Shape::Bin(2) => Term::mul(next(), next()),
        Shape::Bin(3) => Term::div(next(), next()),
        Shape::Bin(_) => Term::modulo(next(), next()),
        Shape::Ite => Term::ite(next(), next(), next()),
    }
}

const CHUNK: usize = 2048;

/// Bottom-up enumeration by increasing size; a term is kept only if no
/// earlier (hence not larger) term has the same fingerprint.
pub fn enumerate_terms(problem: &Problem, cap: usize, seed: u64) -> TermPool {
    let ctx = Ctx::new(problem, seed, GenConfig::default().value_bits);
    let funcs = enumeration_functions(problem);
    let mut pool = TermPool::default();
    let mut seen: HashSet<Vec<Val>> = HashSet::new();
    let mut by_size: Vec<Vec<usize>> = vec![vec![]];
    let mut admit = |pool: &mut TermPool, pt: PoolTerm, by_size: &mut Vec<Vec<usize>>| -> bool {
        if pool.terms.len() >= cap {
            return false;
        }
        if seen.insert(pt.fingerprint.clone()) {
            while by_size.len() <= pt.size {
                by_size.push(vec![]);
            }
            by_size[pt.size].push(pool.terms.len());
            pool.terms.push(pt);
        }
        true
    };

    let mut leaves: Vec<Term> = vec![Term::zero(), Term::one(), Term::two(), Term::x(), Term::y()];
    leaves.extend(
        funcs
            .iter()
            .filter(|(_, n)| *n == 0)
            .map(|(f, _)| Term::App(*f, vec![])),
    );
    for t in leaves {
        let (fingerprint, values) = ctx.combine(&t, &[]);
        let pt = PoolTerm {
            size: 1,
            term: t,
            fingerprint,
            values,
        };
        admit(&mut pool, pt, &mut by_size);
    }

    let mut shapes: Vec<Shape> = funcs
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(f, n)| Shape::App(*f, *n))
        .collect();
    shapes.extend((0..5).map(Shape::Bin));
    shapes.push(Shape::Ite);

    let mut size = 1;
    let mut stalled = 0;
    while pool.terms.len() < cap && stalled < 4 {
        size += 1;
        let before = pool.terms.len();
        let mut pending: Vec<(Term, Vec<usize>)> = Vec::new();
        let mut full = false;
        let mut flush =
            |pending: &mut Vec<(Term, Vec<usize>)>, pool: &mut TermPool, by_size: &mut Vec<Vec<usize>>| -> bool {
                let computed: Vec<PoolTerm> = pending
                    .par_iter()
                    .map(|(t, kids)| {
                        let refs: Vec<&PoolTerm> = kids.iter().map(|&k| &pool.terms[k]).collect();
                        let (fingerprint, values) = ctx.combine(t, &refs);
                        PoolTerm {
                            term: t.clone(),
                            size,
                            fingerprint,
                            values,
                        }
                    })
                    .collect();
                pending.clear();
                computed.into_iter().all(|pt| admit(pool, pt, by_size))
            };
        'layer: for &shape in &shapes {
            let arity = match shape {
                Shape::App(_, n) => n,
                Shape::Bin(_) => 2,
                Shape::Ite => 3,
            };
            for comp in compositions(size - 1, arity) {
                if comp.iter().any(|&s| s >= by_size.len() || by_size[s].is_empty()) {
                    continue;
                }
                let lists: Vec<Vec<usize>> = comp.iter().map(|&s| by_size[s].clone()).collect();
                let mut idx = vec![0usize; arity];
                loop {
                    let kids: Vec<usize> = idx.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
                    let kid_terms: Vec<Term> = kids.iter().map(|&k| pool.terms[k].term.clone()).collect();
                    let t = build(shape, kid_terms);
                    pending.push((t, kids));
                    if pending.len() >= CHUNK && !flush(&mut pending, &mut pool, &mut by_size) {
                        full = true;
                        break 'layer;
                    }
                    let mut d = arity;
                    loop {
                        if d == 0 {
                            break;
                        }
                        d -= 1;
                        idx[d] += 1;
                        if idx[d] < lists[d].len() {
                            break;
                        }
                        idx[d] = 0;
                        if d == 0 {
                            d = usize::MAX;
                            break;
                        }
                    }
                    if d == usize::MAX {
                        break;
                    }
                }
            }
        }
        if !full && !pending.is_empty() {
            flush(&mut pending, &mut pool, &mut by_size);
        }
        stalled = if pool.terms.len() == before { stalled + 1 } else { 0 };
    }
    pool
}

/// Truth of a literal at each grid point as a bit set.
pub type Mask = [u64; 3];

const FULL: Mask = [u64::MAX, u64::MAX, (1u64 << (GRID_LEN - 128)) - 1];

fn count(m: &Mask) -> u32 {
    m.iter().map(|w| w.count_ones()).sum()
}

/// Points where the literal holds, and points where it is defined.
fn relation_mask(a: &[Val], b: &[Val], rel: Rel, negated: bool) -> (Mask, Mask) {
    let mut m = [0u64; 3];
    let mut d = [0u64; 3];
    for i in 0..GRID_LEN {
        let bit = 1 << (i % 64);
        match (&a[i], &b[i]) {
            (Val::Abort, _) | (_, Val::Abort) => {}
            (x, y) => {
                d[i / 64] |= bit;
                let r = match rel {
                    Rel::Eq => x == y,
                    Rel::Le => cmp_le(x, y),
                };
                if r != negated {
                    m[i / 64] |= bit;
                }
            }
        }
    }
    (m, d)
}

fn cmp_le(a: &Val, b: &Val) -> bool {
    match (a, b) {
        (Val::Int(x), Val::Int(y)) => x <= y,
        _ => a.big() <= b.big(),
    }
}

#[derive(Debug, Clone)]
pub struct SampledLiteral {
    pub formula: Formula,
    pub mask: Mask,
    pub defined: Mask,
}

/// Literal classes in sampling order: (negated, must hold on every point).
pub const LITERAL_CLASSES: [(bool, bool); 4] = [(false, true), (false, false), (true, true), (true, false)];

#[derive(Debug, Clone, Default)]
pub struct LiteralPool {
    pub literals: Vec<SampledLiteral>,
    /// Number of literals obtained per class, in `LITERAL_CLASSES` order.
    pub class_counts: [usize; 4],
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Samples literals from uniformly drawn term pairs. Literals that do not
/// mention `x` are discarded.
pub fn sample_literals(pool: &TermPool, cfg: &GenConfig) -> LiteralPool {
    let mut out = LiteralPool::default();
    if pool.terms.is_empty() {
        return out;
    }
    let mut rng = rng_for(cfg.seed, 1);
    let mut seen = HashSet::new();
    let n = pool.terms.len();
    for (ci, &(negated, all)) in LITERAL_CLASSES.iter().enumerate() {
        let mut draws = 0;
        while out.class_counts[ci] < cfg.literals_per_class && draws < cfg.max_draws {
            draws += 1;
            let a = &pool.terms[rng.gen_range(0..n)];
            let b = &pool.terms[rng.gen_range(0..n)];
            let rel = if rng.gen_bool(0.5) { Rel::Eq } else { Rel::Le };
            if !a.term.contains_var(Var::X) && !b.term.contains_var(Var::X) {
                continue;
            }
            let (va, vb) = match cfg.truth {
                TruthMode::Semantic => (&a.values, &b.values),
                TruthMode::Opaque => (&a.fingerprint, &b.fingerprint),
            };
            let (mask, defined) = relation_mask(va, vb, rel, negated);
            let ok = if all { mask == FULL } else { count(&mask) > 0 };
            if !ok {
                continue;
            }
            let formula = Formula::Lit(Literal {
                rel,
                negated,
                lhs: a.term.clone(),
                rhs: b.term.clone(),
            });
            if seen.insert(formula.clone()) {
                out.literals.push(SampledLiteral { formula, mask, defined });
                out.class_counts[ci] += 1;
            }
        }
        if out.class_counts[ci] < cfg.literals_per_class {
            log::warn!(
                "literal class {ci}: only {} of {} after {draws} draws",
                out.class_counts[ci],
                cfg.literals_per_class
            );
        }
    }
    out
}

/// Conjunctions and implications of literal pairs that hold on every grid point.
pub fn build_predicates(lits: &LiteralPool, cfg: &GenConfig) -> Vec<Formula> {
    let mut out = Vec::new();
    let n = lits.literals.len();
    if n == 0 {
        return out;
    }
    let mut rng = rng_for(cfg.seed, 2);
    let mut seen = HashSet::new();
    let mut draws = 0;
    while out.len() < cfg.predicates && draws < cfg.max_draws {
        draws += 1;
        let a = &lits.literals[rng.gen_range(0..n)];
        let b = &lits.literals[rng.gen_range(0..n)];
        let conj = rng.gen_bool(0.5);
        let full: Mask = std::array::from_fn(|i| {
            let m = if conj {
                a.mask[i] & b.mask[i]
            } else {
                !a.mask[i] | b.mask[i]
            };
            m & a.defined[i] & b.defined[i] & FULL[i]
        });
        if full != FULL {
            continue;
        }
        let f = if conj {
            Formula::and(a.formula.clone(), b.formula.clone())
        } else {
            Formula::implies(a.formula.clone(), b.formula.clone())
        };
        if seen.insert(f.clone()) {
            out.push(f);
        }
    }
    if out.len() < cfg.predicates {
        log::warn!(
            "only {} of {} predicates after {draws} draws",
            out.len(),
            cfg.predicates
        );
    }
    out
}

/// Ordered subsets of `candidate_len` distinct predicates.
pub fn sample_candidates(preds: &[Formula], cfg: &GenConfig) -> Vec<Candidate> {
    if preds.len() < cfg.candidate_len {
        return vec![];
    }
    let mut rng = rng_for(cfg.seed, 3);
    (0..cfg.candidates)
        .map(|_| {
            Candidate(
                sample(&mut rng, preds.len(), cfg.candidate_len)
                    .into_iter()
                    .map(|i| preds[i].clone())
                    .collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct InitialBatch {
    pub pool_size: usize,
    pub class_counts: [usize; 4],
    pub predicates: Vec<Formula>,
    pub candidates: Vec<Candidate>,
}

/// The whole initial pipeline for one problem.
pub fn initial_candidates(problem: &Problem, cfg: &GenConfig) -> InitialBatch {
    let pool = enumerate_terms(problem, cfg.term_cap, cfg.seed);
    let lits = sample_literals(&pool, cfg);
    let predicates = build_predicates(&lits, cfg);
    let candidates = sample_candidates(&predicates, cfg);
    InitialBatch {
        pool_size: pool.terms.len(),
        class_counts: lits.class_counts,
        predicates,
        candidates,
    }
}

/// Truth of a formula on every grid point, evaluated with real semantics.
pub fn true_on_grid(problem: &Problem, f: &Formula) -> bool {
    let sem = Semantics::new(problem, gen_limits());
    grid()
        .into_iter()
        .all(|(x, y)| sem.holds(f, &BigInt::from(x), &BigInt::from(y)))
}
