use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{EngineError, Policy, PolicyRequest, Proposal};
use crate::fol::{Clause, HeadAssignment, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    AnyFunction,
    ConstantsOnly,
}

/// Draws a head symbol for every variable of `clause`, uniformly over the
/// permitted symbols of the signature.
pub fn random_assignment<R: Rng + ?Sized>(
    clause: &Clause,
    signature: &Signature,
    mode: AssignmentMode,
    rng: &mut R,
) -> Result<HeadAssignment, EngineError> {
    let vars = clause.variables_in_order();
    if vars.is_empty() {
        return Ok(HeadAssignment::new(Vec::new()));
    }
    let pool = match mode {
        AssignmentMode::AnyFunction => signature.functions().to_vec(),
        AssignmentMode::ConstantsOnly => signature.constants(),
    };
    if pool.is_empty() {
        let clause = clause.name.to_string();
        return Err(match mode {
            AssignmentMode::ConstantsOnly => EngineError::NoConstants { clause },
            AssignmentMode::AnyFunction => EngineError::NoFunctions { clause },
        });
    }
    Ok(HeadAssignment::new(vars.iter().map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()))
}

/// Uniform random head symbols; seeded, so a fixed seed gives a fixed grounding.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl Policy for RandomPolicy {
    fn propose(&mut self, req: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
        let mode = if req.level > 0 && req.constants_only {
            AssignmentMode::ConstantsOnly
        } else {
            AssignmentMode::AnyFunction
        };
        req.targets
            .iter()
            .map(|&i| {
                (0..req.samples)
                    .map(|_| random_assignment(&req.clauses[i], req.signature, mode, &mut self.rng).map(Proposal::Assign))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tptp::parse_cnf;
    use std::collections::HashMap;

    /// Pearson statistic of observed counts against a uniform expectation.
    fn chi_square(counts: &HashMap<Vec<String>, usize>, cells: usize, total: usize) -> f64 {
        let expected = total as f64 / cells as f64;
        let observed_cells = counts.len();
        let missing = (cells - observed_cells) as f64 * expected;
        counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>() + missing
    }

    #[test]
    fn uniform_over_all_functions() {
        let p = parse_cnf("cnf(a, axiom, p(f(X,Z))). cnf(b, axiom, q(t(c,c),g(e))).").unwrap();
        assert_eq!(p.signature.functions().len(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            let a = random_assignment(&p.clauses[0], &p.signature, AssignmentMode::AnyFunction, &mut rng).unwrap();
            *counts.entry(a.names()).or_default() += 1;
        }
        assert_eq!(counts.len(), 25);
        let tg = counts[&vec!["t".to_string(), "g".to_string()]] as f64 / draws as f64;
        assert!((tg - 1.0 / 25.0).abs() < 0.003, "{tg}");
        // 24 degrees of freedom; the 0.999 quantile is about 51.2
        assert!(chi_square(&counts, 25, draws) < 51.2);
    }

    #[test]
    fn constants_only_over_two_constants() {
        let p = parse_cnf("cnf(a, axiom, r(X,Y,Z)). cnf(b, axiom, s(c,e)).").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
        let draws = 80_000;
        for _ in 0..draws {
            let a = random_assignment(&p.clauses[0], &p.signature, AssignmentMode::ConstantsOnly, &mut rng).unwrap();
            assert!(a.heads.iter().all(|h| h.is_constant()));
            *counts.entry(a.names()).or_default() += 1;
        }
        assert_eq!(counts.len(), 8);
        // 7 degrees of freedom; the 0.999 quantile is about 24.3
        assert!(chi_square(&counts, 8, draws) < 24.3);
    }

    #[test]
    fn ground_clause_gets_empty_assignment() {
        let p = parse_cnf("cnf(a, axiom, p(c)).").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_assignment(&p.clauses[0], &p.signature, AssignmentMode::ConstantsOnly, &mut rng).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn missing_constants_is_an_error() {
        let p = parse_cnf("cnf(a, axiom, p(f(X))).").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = random_assignment(&p.clauses[0], &p.signature, AssignmentMode::ConstantsOnly, &mut rng).unwrap_err();
        assert!(err.is_skip());
        assert!(matches!(err, EngineError::NoConstants { .. }));
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = parse_cnf("cnf(a, axiom, p(f(X,Z))). cnf(b, axiom, q(t(c,c),g(e))).").unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| random_assignment(&p.clauses[0], &p.signature, AssignmentMode::AnyFunction, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
