use std::fmt;
use std::str::FromStr;

use crate::filter_core::FilterConfig;
use crate::redistribution::PolicyKind;

/// One filter variant under comparison: the plain quotient filter with shifting
/// deletes, or a tombstone filter running one of the redistribution policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Contender {
    BaseQf,
    Policy(PolicyKind),
}

impl Contender {
    pub const ALL: [Contender; 6] = [
        Contender::BaseQf,
        Contender::Policy(PolicyKind::NoRedistribution),
        Contender::Policy(PolicyKind::AmortizedClean),
        Contender::Policy(PolicyKind::BetweenRuns),
        Contender::Policy(PolicyKind::CleanUp),
        Contender::Policy(PolicyKind::GraveyardHashing),
    ];

    pub fn config(self, q: u32, r: u32, seed: u64) -> FilterConfig {
        match self {
            Contender::BaseQf => FilterConfig::baseline(q, r, seed),
            Contender::Policy(policy) => FilterConfig::new(q, r, seed, policy),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Contender::BaseQf => "base_qf",
            Contender::Policy(policy) => policy.name(),
        }
    }

    pub fn is_graveyard(self) -> bool {
        matches!(self, Contender::Policy(_))
    }
}

impl fmt::Display for Contender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown filter variant `{0}`")]
pub struct ParseContenderError(pub String);

impl FromStr for Contender {
    type Err = ParseContenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Contender::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ParseContenderError(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Contender::ALL {
            assert_eq!(c.name().parse::<Contender>().unwrap(), c);
        }
        assert!("bloom".parse::<Contender>().is_err());
    }
}
