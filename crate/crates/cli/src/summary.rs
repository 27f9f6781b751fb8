use serde::Serialize;

/// Outcome of one acceptance check. `worst_slack >= 0` iff it passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub worst_slack: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
    /// Some oracle ran out of budget and the report is incomplete.
    pub partial: bool,
    pub wall_time_seconds: f64,
}

impl RunSummary {
    pub fn new(experiment: &str, seed: u64) -> Self {
        RunSummary {
            experiment: experiment.to_string(),
            seed,
            criteria: Vec::new(),
            passed: true,
            partial: false,
            wall_time_seconds: 0.0,
        }
    }

    /// Records a criterion that passes when `slack >= 0`.
    ///
    /// Names are unique; a repeated name is a programming error.
    pub fn check(&mut self, name: &str, slack: f64, detail: impl Into<String>) {
        assert!(
            self.criteria.iter().all(|c| c.name != name),
            "criterion `{name}` declared twice"
        );
        let passed = slack >= 0.0;
        self.passed &= passed;
        self.criteria.push(Criterion {
            name: name.to_string(),
            passed,
            worst_slack: slack,
            detail: detail.into(),
        });
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_tracks_criteria() {
        let mut s = RunSummary::new("demo", 1);
        s.check("a", 0.0, "");
        assert!(s.passed);
        s.check("b", -1e-3, "too far");
        assert!(!s.passed);
        assert!(!s.criterion("b").unwrap().passed);
        assert!(s.to_json().contains("\"experiment\": \"demo\""));
    }

    #[test]
    #[should_panic(expected = "declared twice")]
    fn duplicate_names_panic() {
        let mut s = RunSummary::new("demo", 1);
        s.check("a", 0.0, "");
        s.check("a", 0.0, "");
    }
}
