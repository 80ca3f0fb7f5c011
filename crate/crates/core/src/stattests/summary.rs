use serde::{Deserialize, Serialize};

use super::StatError;
use crate::numeric::{mean, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSummary {
    pub user_id: String,
    pub games_played: usize,
    pub win_rate: f64,
}

/// Order in which players enter the cumulative groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerOrdering {
    /// Fewest games first; ties by user id.
    #[default]
    ExperienceAscending,
    /// Lowest win rate first; ties by user id.
    WinRateAscending,
    /// Input order.
    AsGiven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileGroup {
    pub group: usize,
    pub cumulative_player_count: usize,
    pub mean_win_rate: f64,
    /// Sample sd; 0 for a single-player group.
    pub std_win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub k: usize,
    pub ordering: PlayerOrdering,
    pub groups: Vec<QuantileGroup>,
}

/// Mean and spread of win rate over the cumulative prefixes of sizes
/// `⌈j·n/k⌉`, `j = 1..=k`.
pub fn quantile_summary(
    players: &[PlayerSummary],
    k: usize,
    ordering: PlayerOrdering,
) -> Result<QuantileSummary, StatError> {
    if k < 2 {
        return Err(StatError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let n = players.len();
    if n < k {
        return Err(StatError::TooFewPlayers { found: n, required: k });
    }
    let mut ordered: Vec<&PlayerSummary> = players.iter().collect();
    match ordering {
        PlayerOrdering::ExperienceAscending => ordered.sort_by(|a, b| {
            a.games_played
                .cmp(&b.games_played)
                .then_with(|| a.user_id.cmp(&b.user_id))
        }),
        PlayerOrdering::WinRateAscending => ordered.sort_by(|a, b| {
            a.win_rate
                .total_cmp(&b.win_rate)
                .then_with(|| a.user_id.cmp(&b.user_id))
        }),
        PlayerOrdering::AsGiven => {}
    }
    let rates: Vec<f64> = ordered.iter().map(|p| p.win_rate).collect();
    let groups = (1..=k)
        .map(|j| {
            let size = (j * n).div_ceil(k);
            let prefix = &rates[..size];
            QuantileGroup {
                group: j,
                cumulative_player_count: size,
                mean_win_rate: mean(prefix).unwrap_or(0.0),
                std_win_rate: sample_sd(prefix).unwrap_or(0.0),
            }
        })
        .collect();
    Ok(QuantileSummary { k, ordering, groups })
}
