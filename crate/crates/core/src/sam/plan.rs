use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Sam,
    Uniform,
    Reversed,
}

impl PlanKind {
    pub fn name(self) -> &'static str {
        match self {
            PlanKind::Sam => "sam",
            PlanKind::Uniform => "uniform",
            PlanKind::Reversed => "reversed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sam" => Some(PlanKind::Sam),
            "uniform" => Some(PlanKind::Uniform),
            "reversed" => Some(PlanKind::Reversed),
            _ => None,
        }
    }
}

/// Logical coefficient row to physical crossbar row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingPlan {
    pub kind: PlanKind,
    /// Physical rows nearest the clamp first.
    pub row_order: Vec<usize>,
    pub row_of: Vec<usize>,
    /// Criticality used to rank, per logical row.
    pub scores: Vec<f64>,
}

/// Physical rows sorted by distance from the clamp (row 0 is nearest).
pub fn nearest_first(rows: usize) -> Vec<usize> {
    (0..rows).collect()
}

fn check(n: usize, row_order: &[usize]) -> Result<(), MappingError> {
    if n > row_order.len() {
        return Err(MappingError::TooManyCoefficients { coeffs: n, rows: row_order.len() });
    }
    Ok(())
}

fn place(kind: PlanKind, ranked: Vec<usize>, row_order: &[usize], scores: &[f64]) -> MappingPlan {
    let mut row_of = vec![0; ranked.len()];
    for (k, &l) in ranked.iter().enumerate() {
        row_of[l] = row_order[k];
    }
    MappingPlan { kind, row_order: row_order.to_vec(), row_of, scores: scores.to_vec() }
}

/// Highest criticality to the nearest row; ties keep the lower index first.
pub fn assign_rows(scores: &[f64], row_order: &[usize]) -> Result<MappingPlan, MappingError> {
    check(scores.len(), row_order)?;
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(place(PlanKind::Sam, ranked, row_order, scores))
}

/// Logical row `l` on the `l`-th nearest row.
pub fn uniform_plan(n: usize, row_order: &[usize]) -> Result<MappingPlan, MappingError> {
    check(n, row_order)?;
    Ok(place(PlanKind::Uniform, (0..n).collect(), row_order, &vec![0.0; n]))
}

/// Lowest criticality nearest the clamp.
pub fn reversed_plan(scores: &[f64], row_order: &[usize]) -> Result<MappingPlan, MappingError> {
    check(scores.len(), row_order)?;
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    Ok(place(PlanKind::Reversed, ranked, row_order, scores))
}

const HEADER: &str = "# mapping-plan v1";

impl MappingPlan {
    pub fn len(&self) -> usize {
        self.row_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_of.is_empty()
    }

    /// `row basis score` lines in logical order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let order: Vec<String> = self.row_order.iter().map(|r| r.to_string()).collect();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "kind {}", self.kind.name()).unwrap();
        writeln!(s, "row_order {}", order.join(" ")).unwrap();
        writeln!(s, "entries {}", self.row_of.len()).unwrap();
        for (l, (&r, &c)) in self.row_of.iter().zip(&self.scores).enumerate() {
            writeln!(s, "{r} {l} {c:?}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MappingError> {
        let bad = |line: usize, msg: &str| MappingError::Format(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| lines.next().ok_or_else(|| MappingError::Format(format!("missing {what}")));
        let (i, h) = next("header")?;
        if h.trim() != HEADER {
            return Err(bad(i, "unknown header"));
        }
        let field = |(i, l): (usize, &str), key: &str| -> Result<String, MappingError> {
            let mut t = l.splitn(2, ' ');
            if t.next() == Some(key) {
                Ok(t.next().unwrap_or("").trim().to_string())
            } else {
                Err(bad(i, &format!("expected `{key}`")))
            }
        };
        let kind_line = next("kind")?;
        let kind = PlanKind::parse(&field(kind_line, "kind")?).ok_or_else(|| bad(kind_line.0, "unknown plan kind"))?;
        let order_line = next("row_order")?;
        let row_order = field(order_line, "row_order")?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| bad(order_line.0, &e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let entries_line = next("entries")?;
        let n: usize = field(entries_line, "entries")?
            .parse()
            .map_err(|_| bad(entries_line.0, "entries is not an integer"))?;
        let mut row_of = vec![usize::MAX; n];
        let mut scores = vec![0.0; n];
        for _ in 0..n {
            let (i, l) = next("plan entry")?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(i, "expected `row basis score`"));
            }
            let row: usize = t[0].parse().map_err(|_| bad(i, "row"))?;
            let basis: usize = t[1].parse().map_err(|_| bad(i, "basis"))?;
            let score: f64 = t[2].parse().map_err(|_| bad(i, "score"))?;
            if basis >= n || row_of[basis] != usize::MAX {
                return Err(bad(i, "basis index out of range or repeated"));
            }
            row_of[basis] = row;
            scores[basis] = score;
        }
        let mut seen = std::collections::HashSet::new();
        if row_of.iter().any(|r| !row_order.contains(r) || !seen.insert(*r)) {
            return Err(MappingError::Format("plan rows are not a bijection onto row_order".into()));
        }
        Ok(Self { kind, row_order, row_of, scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorting_example() {
        let p = assign_rows(&[1.0, 3.0, 2.0], &[10, 11, 12]).unwrap();
        assert_eq!(p.row_of, vec![12, 10, 11]);
    }

    #[test]
    fn ties_keep_index_order() {
        let p = assign_rows(&[2.0; 5], &nearest_first(8)).unwrap();
        assert_eq!(p.row_of, vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_plan(5, &nearest_first(8)).unwrap().row_of, p.row_of);
    }

    #[test]
    fn reversed_puts_weakest_near() {
        let p = reversed_plan(&[1.0, 3.0, 2.0], &[0, 1, 2]).unwrap();
        assert_eq!(p.row_of, vec![0, 2, 1]);
    }

    #[test]
    fn too_many() {
        assert!(matches!(
            assign_rows(&[1.0; 4], &[0, 1, 2]),
            Err(MappingError::TooManyCoefficients { coeffs: 4, rows: 3 })
        ));
    }

    #[test]
    fn text_roundtrip() {
        let p = assign_rows(&[0.1, 1.0 / 3.0, 0.0, 7.5e-9], &nearest_first(6)).unwrap();
        let q = MappingPlan::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
        assert!(MappingPlan::from_text("# mapping-plan v2\n").is_err());
        let broken = p.to_text().replace("entries 4", "entries 5");
        assert!(MappingPlan::from_text(&broken).is_err());
    }

    proptest! {
        #[test]
        fn rescaling_keeps_permutation(scores in proptest::collection::vec(0.0f64..100.0, 1..64), k in 1e-3f64..1e3) {
            let order = nearest_first(64);
            let a = assign_rows(&scores, &order).unwrap();
            let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
            let b = assign_rows(&scaled, &order).unwrap();
            prop_assert_eq!(a.row_of, b.row_of);
        }

        #[test]
        fn plan_is_injective(scores in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let p = assign_rows(&scores, &nearest_first(40)).unwrap();
            let mut rows = p.row_of.clone();
            rows.sort_unstable();
            rows.dedup();
            prop_assert_eq!(rows.len(), scores.len());
            for w in 0..scores.len() {
                for v in 0..scores.len() {
                    if scores[w] > scores[v] {
                        prop_assert!(p.row_of[w] < p.row_of[v]);
                    }
                }
            }
        }
    }
}
