//! Design-matrix construction under explicit normalization choices.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::categories::random_category_sums;
use super::hermite::hermite_values;
use super::recipe::{Centering, Clause, ControlClause, ControlKind, EncodingOption, Recipe, Reference};
use super::table::DataTable;
use crate::error::{Error, Result};
use crate::linalg::{decompose, norm2, DenseMatrix, ProjectionBundle};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{lower_median, mean};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceChoice {
    Auto,
    Level(String),
    /// Keep every level's dummy; collinear with the intercept.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CategoricalEncoding {
    OneHot(ReferenceChoice),
    Sums(u64),
}

/// Overrides applied on top of a recipe. `None` fields leave each clause's
/// own option in force.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationChoice {
    pub centering: Option<Centering>,
    pub categorical_encoding: Option<CategoricalEncoding>,
    /// Permutes all non-intercept columns after construction.
    pub column_order_seed: Option<u64>,
    /// Per hermite clause, in recipe order.
    pub hermite_offsets: Option<Vec<f64>>,
}

impl NormalizationChoice {
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("choice serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProvenance {
    /// Source clause label, e.g. `x`, `x*occ`, `hermite(z)`, or `(intercept)`.
    pub source: String,
    /// Transform applied, e.g. `center=mean^2`, `onehot[b]`, `H3(z-0.3)`.
    pub transform: String,
    /// Category subset for indicator columns.
    pub categories: Option<Vec<String>>,
    pub unpenalized: bool,
}

impl ColumnProvenance {
    fn intercept() -> Self {
        ColumnProvenance {
            source: "(intercept)".into(),
            transform: "const".into(),
            categories: None,
            unpenalized: true,
        }
    }

    fn plain(source: impl Into<String>, transform: impl Into<String>) -> Self {
        ColumnProvenance {
            source: source.into(),
            transform: transform.into(),
            categories: None,
            unpenalized: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub matrix: DenseMatrix,
    pub provenance: Vec<ColumnProvenance>,
    pub choice: NormalizationChoice,
}

impl DesignMatrix {
    /// Wraps a raw control matrix, prepending an intercept column.
    pub fn with_intercept(controls: &DenseMatrix) -> Result<Self> {
        let ones = DenseMatrix::from_fn(controls.rows(), 1, |_, _| 1.0);
        let matrix = ones.hstack(controls)?;
        let mut provenance = vec![ColumnProvenance::intercept()];
        provenance.extend((0..controls.cols()).map(|j| ColumnProvenance::plain(format!("w{j}"), "raw")));
        Ok(DesignMatrix {
            matrix,
            provenance,
            choice: NormalizationChoice::default(),
        })
    }

    /// Wraps a matrix as-is; `unpenalized` flags columns exempt from lasso penalties.
    pub fn from_parts(matrix: DenseMatrix, unpenalized: &[usize]) -> Result<Self> {
        if unpenalized.iter().any(|&j| j >= matrix.cols()) {
            return Err(Error::input("unpenalized index out of range"));
        }
        let provenance = (0..matrix.cols())
            .map(|j| ColumnProvenance {
                unpenalized: unpenalized.contains(&j),
                ..ColumnProvenance::plain(format!("w{j}"), "raw")
            })
            .collect();
        Ok(DesignMatrix {
            matrix,
            provenance,
            choice: NormalizationChoice::default(),
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn unpenalized(&self) -> Vec<usize> {
        (0..self.cols()).filter(|&j| self.provenance[j].unpenalized).collect()
    }

    pub fn penalized(&self) -> Vec<usize> {
        (0..self.cols()).filter(|&j| !self.provenance[j].unpenalized).collect()
    }

    pub fn select(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            matrix: self.matrix.select_columns(idx),
            provenance: idx.iter().map(|&j| self.provenance[j].clone()).collect(),
            choice: self.choice.clone(),
        }
    }

    pub fn bundle(&self) -> Result<ProjectionBundle> {
        decompose(&self.matrix)
    }
}

/// Largest relative residual from projecting each column of `a` on the
/// span of `b`, and vice versa. Zero (up to rounding) iff the spans agree.
pub fn mutual_projection_residual(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let ba = decompose(a)?;
    let bb = decompose(b)?;
    let one_way = |m: &DenseMatrix, bundle: &ProjectionBundle| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in m.columns() {
            let nc = norm2(c);
            if nc == 0.0 {
                continue;
            }
            worst = worst.max(norm2(&bundle.annihilate(c)?) / nc);
        }
        Ok(worst)
    };
    Ok(one_way(a, &bb)?.max(one_way(b, &ba)?))
}

struct Factor {
    columns: Vec<Vec<f64>>,
    labels: Vec<String>,
    categories: Vec<Option<Vec<String>>>,
}

fn center_values(name: &str, x: &[f64], centering: Centering) -> Result<(Vec<f64>, String)> {
    let range = || -> Result<(f64, f64)> {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return Err(Error::input(format!("`{name}` has zero range; cannot rescale")));
        }
        Ok((lo, hi))
    };
    let out = match centering {
        Centering::None => x.to_vec(),
        Centering::Mean => {
            let m = mean(x);
            x.iter().map(|v| v - m).collect()
        }
        Centering::Median => {
            let m = lower_median(x);
            x.iter().map(|v| v - m).collect()
        }
        Centering::Range01 => {
            let (lo, hi) = range()?;
            x.iter().map(|v| (v - lo) / (hi - lo)).collect()
        }
        Centering::Range11 => {
            let (lo, hi) = range()?;
            x.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
        }
        Centering::Offset(l) => {
            if !l.is_finite() {
                return Err(Error::input("offset must be finite"));
            }
            x.iter().map(|v| v - l).collect()
        }
    };
    Ok((out, format!("center={centering}")))
}

fn sorted_levels(values: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = values.to_vec();
    levels.sort();
    levels.dedup();
    levels
}

fn categorical_factor(
    clause: &ControlClause,
    values: &[String],
    encoding: &CategoricalEncoding,
) -> Result<Factor> {
    let levels = sorted_levels(values);
    let k = levels.len();
    if k < 2 {
        return Err(Error::input(format!(
            "categorical `{}` has {k} observed level(s); at least 2 required",
            clause.name
        )));
    }
    let codes: Vec<usize> = values
        .iter()
        .map(|v| levels.binary_search(v).expect("level present"))
        .collect();
    let mut f = Factor {
        columns: Vec::new(),
        labels: Vec::new(),
        categories: Vec::new(),
    };
    match encoding {
        CategoricalEncoding::OneHot(reference) => {
            let drop = match reference {
                ReferenceChoice::Auto => Some(0),
                ReferenceChoice::None => None,
                ReferenceChoice::Level(l) => Some(levels.binary_search(l).map_err(|_| {
                    Error::input(format!("reference level `{l}` not observed in `{}`", clause.name))
                })?),
            };
            for (g, level) in levels.iter().enumerate() {
                if Some(g) == drop {
                    continue;
                }
                f.columns.push(codes.iter().map(|&c| f64::from(u8::from(c == g))).collect());
                f.labels.push(format!("onehot[{level}]"));
                f.categories.push(Some(vec![level.clone()]));
            }
        }
        CategoricalEncoding::Sums(seed) => {
            let map = random_category_sums(k, *seed)?.absorb_intercept()?;
            let cols = map.encode(&codes);
            for (row, col) in map.rows.iter().zip(cols) {
                let subset: Vec<String> = levels
                    .iter()
                    .zip(row)
                    .filter(|(_, &b)| b == 1)
                    .map(|(l, _)| l.clone())
                    .collect();
                f.labels.push(format!("sums{{{}}}", subset.join(",")));
                f.categories.push(Some(subset));
                f.columns.push(col);
            }
        }
    }
    Ok(f)
}

fn clause_encoding(clause: &ControlClause, choice: &NormalizationChoice, clause_index: usize) -> CategoricalEncoding {
    match &choice.categorical_encoding {
        Some(CategoricalEncoding::Sums(seed)) => CategoricalEncoding::Sums(derive_seed(*seed, clause_index as u64)),
        Some(e) => e.clone(),
        None => match clause.encode {
            Some(EncodingOption::Sums) => CategoricalEncoding::Sums(derive_seed(0, clause_index as u64)),
            _ => CategoricalEncoding::OneHot(match &clause.reference {
                None | Some(Reference::Auto) => ReferenceChoice::Auto,
                Some(Reference::Level(l)) => ReferenceChoice::Level(l.clone()),
            }),
        },
    }
}

/// Builds the design matrix for `recipe` on `table`.
///
/// Column 0 is always an unpenalized intercept. Continuous baselines are
/// transformed per the effective centering before powers and
/// interactions are formed; interactions multiply the transformed
/// degree-one columns without re-centering.
pub fn build_design(recipe: &Recipe, table: &DataTable, choice: &NormalizationChoice) -> Result<DesignMatrix> {
    recipe.validate()?;
    let n = table.rows();
    if n == 0 {
        return Err(Error::input("data table has no rows"));
    }
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut provenance = vec![ColumnProvenance::intercept()];
    let mut base: std::collections::HashMap<String, Factor> = Default::default();

    let n_hermite = recipe.hermites().count();
    if let Some(offsets) = &choice.hermite_offsets {
        if offsets.len() != n_hermite {
            return Err(Error::input(format!(
                "{} hermite offsets supplied for {n_hermite} hermite clauses",
                offsets.len()
            )));
        }
    }
    let mut hermite_idx = 0;

    for (ci, clause) in recipe.clauses.iter().enumerate() {
        match clause {
            Clause::Control(c) => {
                let factor = match c.kind {
                    ControlKind::Continuous => {
                        let x = table.numeric(&c.name)?;
                        let centering = choice.centering.or(c.center).unwrap_or(Centering::None);
                        let (t, label) = center_values(&c.name, &x, centering)?;
                        for d in 1..=c.degree() {
                            columns.push(t.iter().map(|v| v.powi(d as i32)).collect());
                            let transform = if d == 1 { label.clone() } else { format!("{label}^{d}") };
                            provenance.push(ColumnProvenance::plain(&c.name, transform));
                        }
                        Factor {
                            columns: vec![t],
                            labels: vec![label],
                            categories: vec![None],
                        }
                    }
                    ControlKind::Binary => {
                        let x = table.numeric(&c.name)?;
                        if let Some(i) = x.iter().position(|&v| v != 0.0 && v != 1.0) {
                            return Err(Error::input(format!(
                                "binary `{}` has value {} at data row {}",
                                c.name,
                                x[i],
                                i + 1
                            )));
                        }
                        columns.push(x.clone());
                        provenance.push(ColumnProvenance::plain(&c.name, "binary"));
                        Factor {
                            columns: vec![x],
                            labels: vec!["binary".into()],
                            categories: vec![None],
                        }
                    }
                    ControlKind::Categorical => {
                        let encoding = clause_encoding(c, choice, ci);
                        let f = categorical_factor(c, table.text(&c.name)?, &encoding)?;
                        for ((col, label), cats) in f.columns.iter().zip(&f.labels).zip(&f.categories) {
                            columns.push(col.clone());
                            provenance.push(ColumnProvenance {
                                source: c.name.clone(),
                                transform: label.clone(),
                                categories: cats.clone(),
                                unpenalized: false,
                            });
                        }
                        f
                    }
                };
                base.insert(c.name.clone(), factor);
            }
            Clause::Interact(names) => {
                let source = names.join("*");
                let mut acc: Vec<(Vec<f64>, Vec<String>, Option<Vec<String>>)> = vec![(vec![1.0; n], vec![], None)];
                for name in names {
                    let f = base.get(name).ok_or_else(|| {
                        Error::input(format!("interaction factor `{name}` must be declared before use"))
                    })?;
                    let mut next = Vec::with_capacity(acc.len() * f.columns.len());
                    for (col, labels, cats) in &acc {
                        for ((fc, fl), fcat) in f.columns.iter().zip(&f.labels).zip(&f.categories) {
                            let prod: Vec<f64> = col.iter().zip(fc).map(|(a, b)| a * b).collect();
                            let mut l = labels.clone();
                            l.push(format!("{name}:{fl}"));
                            let c = match (cats, fcat) {
                                (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
                                (Some(a), None) => Some(a.clone()),
                                (None, b) => b.clone(),
                            };
                            next.push((prod, l, c));
                        }
                    }
                    acc = next;
                }
                for (col, labels, cats) in acc {
                    columns.push(col);
                    provenance.push(ColumnProvenance {
                        source: source.clone(),
                        transform: labels.join("*"),
                        categories: cats,
                        unpenalized: false,
                    });
                }
            }
            Clause::Hermite(h) => {
                let z = table.numeric(&h.name)?;
                let offset = match &choice.hermite_offsets {
                    Some(o) => o[hermite_idx],
                    None => h.offset.unwrap_or(0.0),
                };
                hermite_idx += 1;
                if !offset.is_finite() {
                    return Err(Error::input("hermite offset must be finite"));
                }
                let degree = h.degree as usize;
                let mut cols = vec![Vec::with_capacity(n); degree];
                for &zi in &z {
                    let v = hermite_values(zi - offset, degree);
                    for j in 1..=degree {
                        cols[j - 1].push(v[j]);
                    }
                }
                for (j, col) in cols.into_iter().enumerate() {
                    columns.push(col);
                    provenance.push(ColumnProvenance::plain(
                        format!("hermite({})", h.name),
                        format!("H{}({}-{offset:?})", j + 1, h.name),
                    ));
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..columns.len()).collect();
    if let Some(seed) = choice.column_order_seed {
        order[1..].shuffle(&mut rng_from_seed(seed));
    }
    let matrix = DenseMatrix::from_columns(&order.iter().map(|&j| columns[j].clone()).collect::<Vec<_>>())?;
    let provenance = order.iter().map(|&j| provenance[j].clone()).collect();
    Ok(DesignMatrix {
        matrix,
        provenance,
        choice: choice.clone(),
    })
}

/// Randomly permutes the penalized columns, then keeps the columns admitted
/// by the greedy rank-revealing decomposition. Unpenalized columns stay in
/// front so the intercept is never the column dropped.
pub fn random_collinearity_resolution(x: &DesignMatrix, seed: u64) -> Result<DesignMatrix> {
    let mut front = x.unpenalized();
    let mut rest = x.penalized();
    rest.shuffle(&mut rng_from_seed(seed));
    front.extend(rest);
    let permuted = x.select(&front);
    let bundle = permuted.bundle()?;
    let mut out = permuted.select(bundle.kept());
    out.choice.column_order_seed = Some(seed);
    Ok(out)
}
