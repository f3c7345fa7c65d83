use std::collections::BTreeMap;

use super::stats::{anova_one_way, welch_t_test, AnovaResult, TTestResult};
use super::{Method, PaiCurve};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTest {
    pub a: Method,
    pub b: Method,
    pub result: TTestResult,
}

/// Per-group PAI scores of the compared methods and the tests run on them.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTests {
    pub scores: Vec<(Method, Vec<f64>)>,
    /// `None` when fewer than two methods or groups are available.
    pub anova: Option<AnovaResult>,
    pub pairwise: Vec<PairwiseTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleComparison {
    pub area_pct: f64,
    pub tests: MethodTests,
}

/// Tests on each group's mean PAI over `scales`, the scales feasible for
/// every method in every group.
#[derive(Debug, Clone, PartialEq)]
pub struct OverallComparison {
    pub scales: Vec<f64>,
    pub tests: MethodTests,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodComparison {
    pub methods: Vec<Method>,
    pub group_count: usize,
    pub scales: Vec<ScaleComparison>,
    pub overall: Option<OverallComparison>,
    /// Mean PAI over groups and those common scales.
    pub mean_pai: Vec<(Method, Option<f64>)>,
}

impl MethodComparison {
    pub fn scale(&self, area_pct: f64) -> Option<&ScaleComparison> {
        self.scales.iter().find(|s| (s.area_pct - area_pct).abs() < 1e-9)
    }
}

fn test_scores(scores: Vec<(Method, Vec<f64>)>) -> MethodTests {
    let enough = scores.len() >= 2 && scores.iter().all(|(_, v)| v.len() >= 2);
    let anova = if enough {
        let groups: Vec<Vec<f64>> = scores.iter().map(|(_, v)| v.clone()).collect();
        anova_one_way(&groups).ok()
    } else {
        None
    };
    let mut pairwise = Vec::new();
    if enough {
        for x in 0..scores.len() {
            for y in x + 1..scores.len() {
                if let Ok(result) = welch_t_test(&scores[x].1, &scores[y].1) {
                    pairwise.push(PairwiseTest {
                        a: scores[x].0,
                        b: scores[y].0,
                        result,
                    });
                }
            }
        }
    }
    MethodTests {
        scores,
        anova,
        pairwise,
    }
}

/// Compare methods scale by scale on their per-group PAI. A method takes part
/// at a scale only when that scale is feasible in all of its groups, which
/// keeps group counts equal across the compared methods.
pub fn compare_methods(curves: &BTreeMap<Method, Vec<PaiCurve>>) -> Result<MethodComparison> {
    let (_, first_curves) = curves
        .iter()
        .next()
        .ok_or_else(|| Error::InvalidArgument("no methods to compare".into()))?;
    let group_count = first_curves.len();
    let reference = first_curves
        .first()
        .ok_or_else(|| Error::InvalidArgument("no prediction groups to compare".into()))?;
    for (m, cs) in curves {
        if cs.len() != group_count {
            return Err(Error::InvalidArgument(format!(
                "{m} has {} groups, expected {group_count}",
                cs.len()
            )));
        }
        if let Some(g) = cs.iter().position(|c| !c.same_lattice(reference)) {
            return Err(Error::LatticeMismatch(format!("{m} group {} has a different scale lattice", g + 1)));
        }
    }

    let methods: Vec<Method> = curves.keys().copied().collect();
    let mut scales = Vec::with_capacity(reference.points.len());
    let mut common = Vec::new();
    for (s, p) in reference.points.iter().enumerate() {
        let scores: Vec<(Method, Vec<f64>)> = curves
            .iter()
            .filter(|(_, cs)| cs.iter().all(|c| c.points[s].feasible))
            .map(|(m, cs)| (*m, cs.iter().map(|c| c.points[s].pai.unwrap_or(0.0)).collect()))
            .collect();
        if scores.len() == methods.len() {
            common.push(s);
        }
        scales.push(ScaleComparison {
            area_pct: p.area_pct,
            tests: test_scores(scores),
        });
    }

    let (overall, mean_pai) = if common.is_empty() {
        (None, methods.iter().map(|&m| (m, None)).collect())
    } else {
        let per_group: Vec<(Method, Vec<f64>)> = curves
            .iter()
            .map(|(m, cs)| {
                let v = cs
                    .iter()
                    .map(|c| common.iter().map(|&s| c.points[s].pai.unwrap_or(0.0)).sum::<f64>() / common.len() as f64)
                    .collect();
                (*m, v)
            })
            .collect();
        let mean_pai = per_group
            .iter()
            .map(|(m, v)| (*m, Some(v.iter().sum::<f64>() / v.len() as f64)))
            .collect();
        let overall = OverallComparison {
            scales: common.iter().map(|&s| reference.points[s].area_pct).collect(),
            tests: test_scores(per_group),
        };
        (Some(overall), mean_pai)
    };

    Ok(MethodComparison {
        methods,
        group_count,
        scales,
        overall,
        mean_pai,
    })
}
