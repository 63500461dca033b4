use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::Rng;

use super::counter::{ChannelMap, CHANNELS_PER_MODE, DEFAULT_PERIOD_PS};
use super::records::TimetagRecord;
use crate::detector::DetectorModel;
use crate::engine::pattern_distribution;
use crate::error::{Error, Result};
use crate::fock::{Mode, RotationSpec, SourceParams};
use crate::sampling::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub pulses: u64,
    pub period_ps: u64,
    /// Clicks land uniformly in `[k period, k period + jitter)` for pulse `k`.
    pub jitter_ps: u64,
    pub seed: u64,
    pub map: ChannelMap,
}

impl SyntheticConfig {
    pub fn new(pulses: u64, seed: u64) -> Self {
        Self {
            pulses,
            period_ps: DEFAULT_PERIOD_PS,
            jitter_ps: 1_000,
            seed,
            map: ChannelMap::default(),
        }
    }
}

/// Time-ordered clicks for `pulses` independent source pulses. Each pulse draws
/// one pattern from the model and fires that many distinct channels per mode.
pub fn generate_synthetic_timetags(
    rot: RotationSpec,
    src: &SourceParams,
    det: &DetectorModel,
    config: &SyntheticConfig,
) -> Result<Vec<TimetagRecord>> {
    if config.period_ps == 0 || config.jitter_ps == 0 || config.jitter_ps > config.period_ps {
        return Err(Error::domain(format!(
            "jitter of {} ps must be positive and at most the period of {} ps",
            config.jitter_ps, config.period_ps
        )));
    }
    if config.pulses.checked_mul(config.period_ps).is_none() {
        return Err(Error::domain("acquisition overflows the 64-bit time axis"));
    }
    let channels = Mode::ALL.map(|m| config.map.channels(m));
    let dist = pattern_distribution(rot, src, det)?;
    for (r, p) in &dist.entries {
        if *p > 0.0 {
            if let Some(m) = Mode::ALL
                .into_iter()
                .find(|&m| r.get(m) as usize > channels[m.index()].len())
            {
                return Err(Error::domain(format!(
                    "pattern {r} needs {} channels on {m}, the map has {}",
                    r.get(m),
                    CHANNELS_PER_MODE
                )));
            }
        }
    }
    let weights = WeightedIndex::new(dist.entries.iter().map(|&(_, p)| p.max(0.0)))
        .map_err(|e| Error::domain(format!("pattern distribution cannot be sampled: {e}")))?;

    let mut rng = stream_rng(config.seed, 0);
    let mut out = Vec::new();
    let mut pulse_clicks = Vec::new();
    for k in 0..config.pulses {
        let (r, _) = dist.entries[weights.sample(&mut rng)];
        if r.total() == 0 {
            continue;
        }
        let base = k * config.period_ps;
        pulse_clicks.clear();
        for m in Mode::ALL {
            let chans = &channels[m.index()];
            for i in sample(&mut rng, chans.len(), r.get(m) as usize) {
                let t = base + rng.random_range(0..config.jitter_ps);
                pulse_clicks.push(TimetagRecord {
                    time_ps: t,
                    channel: chans[i],
                });
            }
        }
        pulse_clicks.sort_unstable();
        out.extend_from_slice(&pulse_clicks);
    }
    Ok(out)
}
