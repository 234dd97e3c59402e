use serde::Serialize;

use crate::net::{CompiledNet, Net, Role};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("weight vector has {got} entries, matrix has {want} places")]
    Dimension { got: usize, want: usize },
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("{0}")]
    Formula(String),
}

/// `C[p][t] = w(t,p) - w(p,t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IncidenceMatrix {
    pub places: Vec<String>,
    pub transitions: Vec<String>,
    pub entries: Vec<Vec<i64>>,
}

impl IncidenceMatrix {
    pub fn get(&self, place: &str, transition: &str) -> Option<i64> {
        let p = self.places.iter().position(|x| x == place)?;
        let t = self.transitions.iter().position(|x| x == transition)?;
        Some(self.entries[p][t])
    }

    /// Weight vector with 1 on the named places, 0 elsewhere.
    pub fn indicator(&self, places: &[&str]) -> Result<Vec<i64>, AnalysisError> {
        let mut y = vec![0; self.places.len()];
        for p in places {
            let i = self
                .places
                .iter()
                .position(|x| x == p)
                .ok_or_else(|| AnalysisError::UnknownPlace(p.to_string()))?;
            y[i] = 1;
        }
        Ok(y)
    }

    /// `yᵀC`, one entry per transition.
    pub fn weighted_sum(&self, y: &[i64]) -> Result<Vec<i64>, AnalysisError> {
        if y.len() != self.places.len() {
            return Err(AnalysisError::Dimension {
                got: y.len(),
                want: self.places.len(),
            });
        }
        Ok((0..self.transitions.len())
            .map(|t| {
                (0..self.places.len())
                    .map(|p| y[p] * self.entries[p][t])
                    .sum()
            })
            .collect())
    }
}

pub fn incidence_matrix(net: &CompiledNet) -> IncidenceMatrix {
    let entries = (0..net.places.len())
        .map(|p| net.transitions.iter().map(|t| t.delta(p)).collect())
        .collect();
    IncidenceMatrix {
        places: net.places.clone(),
        transitions: net.transitions.iter().map(|t| t.name.clone()).collect(),
        entries,
    }
}

/// True iff `yᵀC = 0`.
pub fn check_p_invariant(c: &IncidenceMatrix, y: &[i64]) -> Result<bool, AnalysisError> {
    Ok(c.weighted_sum(y)?.iter().all(|&v| v == 0))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SafetyReport {
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Every output transition consumes its agent's stable-mode place and no other mode place.
pub fn structural_output_safety(net: &Net) -> SafetyReport {
    let Some(roles) = net.smart.as_ref() else {
        return SafetyReport {
            passed: false,
            violations: vec!["net carries no SMART role annotations".into()],
        };
    };
    let modes = roles.mode_places();
    let mut violations = Vec::new();
    for t in net.transitions.iter().filter(|t| t.role == Role::Output) {
        let owner = roles.agents.iter().find(|a| a.outputs.contains(&t.id));
        let Some(a) = owner else {
            violations.push(format!("`{}`: output not assigned to an agent", t.id));
            continue;
        };
        let inputs = net.inputs(&t.id);
        if !inputs.iter().any(|&(p, w)| p == a.modes.stable && w >= 1) {
            violations.push(format!(
                "`{}`: `{}` is not a preplace",
                t.id, a.modes.stable
            ));
        }
        for (p, _) in inputs {
            if p != a.modes.stable && modes.contains(&p) {
                violations.push(format!("`{}`: mode place `{p}` is a preplace", t.id));
            }
        }
    }
    SafetyReport {
        passed: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ArcDesc;
    use crate::smart::{build_multi_agent, build_single_agent, AgentSpec, SmartConfig};

    fn single() -> (Net, CompiledNet) {
        let n = build_single_agent(&SmartConfig::default()).unwrap();
        let c = CompiledNet::new(&n).unwrap();
        (n, c)
    }

    #[test]
    fn incidence_entries_follow_arcs() {
        let (_, c) = single();
        let m = incidence_matrix(&c);
        assert_eq!(m.get("P_S", "t_SM"), Some(-1));
        assert_eq!(m.get("P_M", "t_SM"), Some(1));
        assert_eq!(m.get("P_S", "t_out"), Some(0));
    }

    #[test]
    fn mode_indicator_is_invariant() {
        let (_, c) = single();
        let m = incidence_matrix(&c);
        let y = m.indicator(&["P_S", "P_M", "P_A", "P_R"]).unwrap();
        assert!(check_p_invariant(&m, &y).unwrap());
        let only_s = m.indicator(&["P_S"]).unwrap();
        assert!(!check_p_invariant(&m, &only_s).unwrap());
        let sums = m.weighted_sum(&only_s).unwrap();
        let t_sm = m.transitions.iter().position(|t| t == "t_SM").unwrap();
        assert_eq!(sums[t_sm], -1);
        assert!(check_p_invariant(&m, &vec![0; m.places.len()]).unwrap());
        assert_eq!(
            check_p_invariant(&m, &[1, 0]),
            Err(AnalysisError::Dimension {
                got: 2,
                want: m.places.len()
            })
        );
    }

    #[test]
    fn per_agent_invariants_in_multi_agent_net() {
        let agents: Vec<AgentSpec> = ["a", "b"]
            .iter()
            .map(|id| AgentSpec {
                id: id.to_string(),
                config: SmartConfig::default(),
            })
            .collect();
        let n = build_multi_agent(&agents).unwrap();
        let m = incidence_matrix(&CompiledNet::new(&n).unwrap());
        for a in &n.smart.as_ref().unwrap().agents {
            let y = m.indicator(&a.modes.all()).unwrap();
            assert!(check_p_invariant(&m, &y).unwrap());
        }
    }

    #[test]
    fn output_safety_flags_extra_mode_preplace() {
        let (mut n, _) = single();
        assert!(structural_output_safety(&n).passed);
        n.arcs.push(ArcDesc::new("P_M", "t_out", 1));
        let r = structural_output_safety(&n);
        assert!(!r.passed);
        assert!(r.violations[0].contains("t_out"));
    }
}
