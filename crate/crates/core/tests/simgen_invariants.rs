use std::collections::BTreeMap;

use gameskill::ingest::GameLog;
use gameskill::model::Game;
use gameskill::simgen::{simulate, SimConfig, SimMode};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = SimConfig> {
    (
        prop_oneof![Just(Game::Poker), Just(Game::Rummy)],
        prop_oneof![Just(2u32), Just(3), Just(6)],
        12usize..60,
        1u32..25,
        prop_oneof![Just(SimMode::Chance), Just(SimMode::Skill)],
        0.0f64..2.0,
        0.0f64..40.0,
        any::<u64>(),
    )
        .prop_map(|(game, table_size, n_players, games, mode, skill_sd, points_sd, seed)| SimConfig {
            game,
            table_size,
            n_players,
            games_per_player: games,
            min_games_per_player: Some(1),
            mode,
            skill_sd,
            points_sd,
            seed,
            truth_samples: 16,
            ..SimConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_logs_satisfy_their_invariants(c in config()) {
        let out = simulate(&c).unwrap();
        let bytes = out.log.to_csv_bytes();
        let (back, stats) = GameLog::read(c.game, bytes.as_slice()).unwrap();
        prop_assert_eq!(stats.rows_rejected, 0);
        prop_assert_eq!(&back, &out.log);
        let k = c.table_size as usize;
        match &out.log {
            GameLog::Poker(rows) => {
                let mut hands: BTreeMap<&str, Vec<_>> = BTreeMap::new();
                for r in rows {
                    hands.entry(r.game_id.as_str()).or_default().push(r);
                }
                for hand in hands.values() {
                    prop_assert_eq!(hand.len(), k);
                    prop_assert_eq!(hand.iter().filter(|r| r.chips_won > 0.0).count(), 1);
                    let net: f64 = hand.iter().map(|r| r.value_delta_bb()).sum();
                    prop_assert_eq!(net, 0.0);
                }
            }
            GameLog::Rummy(rows) => {
                let mut deals: BTreeMap<&str, Vec<_>> = BTreeMap::new();
                for r in rows {
                    deals.entry(r.game_id.as_str()).or_default().push(r);
                }
                for deal in deals.values() {
                    prop_assert_eq!(deal.len(), k);
                    prop_assert_eq!(deal.iter().filter(|r| r.is_winner).count(), 1);
                    let lost: u32 = deal.iter().map(|r| r.loss_points).sum();
                    let won: u32 = deal.iter().map(|r| r.winner_points).sum();
                    prop_assert_eq!(lost, won);
                    for r in deal.iter().filter(|r| !r.is_winner) {
                        prop_assert!((2..=80).contains(&r.loss_points));
                    }
                }
            }
        }
        for (p, &n) in out.truth.players.iter().zip(&out.games_played) {
            prop_assert!(n <= p.target_games);
        }
        if c.mode == SimMode::Chance {
            for p in &out.truth.players {
                prop_assert_eq!(p.expected_win_rate, 1.0 / k as f64);
            }
        }
    }

    #[test]
    fn identical_configs_give_identical_bytes(c in config()) {
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        prop_assert_eq!(a.log.to_csv_bytes(), b.log.to_csv_bytes());
        prop_assert_eq!(a.truth.to_json(), b.truth.to_json());
    }
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let c = SimConfig {
        game: Game::Rummy,
        table_size: 3,
        n_players: 300,
        games_per_player: 30,
        mode: SimMode::Skill,
        seed: 77,
        truth_samples: 64,
        ..SimConfig::default()
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| simulate(&c).unwrap());
    let b = four.install(|| simulate(&c).unwrap());
    assert_eq!(a.log.to_csv_bytes(), b.log.to_csv_bytes());
    assert_eq!(a.truth, b.truth);
}

#[test]
fn chance_six_player_mean_is_one_sixth() {
    let c = SimConfig {
        game: Game::Poker,
        table_size: 6,
        n_players: 600,
        games_per_player: 100,
        seed: 3,
        ..SimConfig::default()
    };
    let out = simulate(&c).unwrap();
    let GameLog::Poker(rows) = &out.log else { unreachable!() };
    let wins = rows.iter().filter(|r| r.chips_won > 0.0).count() as f64;
    assert!((wins / rows.len() as f64 - 1.0 / 6.0).abs() < 1e-12);
}
