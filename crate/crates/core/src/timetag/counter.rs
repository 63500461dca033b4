use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::records::{TimetagRecord, CHANNELS};
use crate::engine::DetectionPattern;
use crate::error::{Error, Location, Result};
use crate::fock::Mode;

pub const DEFAULT_PERIOD_PS: u64 = 12_500;
pub const DEFAULT_WINDOW_PS: u64 = 2_500;

pub const CHANNELS_PER_MODE: usize = 4;

const MASKS: usize = 1 << CHANNELS;

/// Assignment of the sixteen counter channels to optical modes, four per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMap {
    modes: [Mode; CHANNELS as usize],
}

impl Default for ChannelMap {
    /// Channels 0-3 on `a_h`, 4-7 on `a_v`, 8-11 on `b_h`, 12-15 on `b_v`.
    fn default() -> Self {
        Self {
            modes: std::array::from_fn(|ch| Mode::ALL[ch / CHANNELS_PER_MODE]),
        }
    }
}

impl ChannelMap {
    pub fn new(modes: [Mode; CHANNELS as usize]) -> Result<Self> {
        for m in Mode::ALL {
            let n = modes.iter().filter(|&&x| x == m).count();
            if n != CHANNELS_PER_MODE {
                return Err(Error::domain(format!(
                    "{m} has {n} channels, expected {CHANNELS_PER_MODE}"
                )));
            }
        }
        Ok(Self { modes })
    }

    pub fn mode(&self, channel: u8) -> Mode {
        self.modes[channel as usize]
    }

    pub fn channels(&self, mode: Mode) -> [u8; CHANNELS_PER_MODE] {
        let mut out = [0; CHANNELS_PER_MODE];
        let mut it = (0..CHANNELS).filter(|&c| self.mode(c) == mode);
        for slot in &mut out {
            *slot = it.next().expect("four channels per mode");
        }
        out
    }

    /// Bit mask of the channels assigned to `mode`.
    pub fn mask(&self, mode: Mode) -> u16 {
        self.channels(mode).iter().fold(0, |m, &c| m | (1 << c))
    }

    /// Click counts per mode for a set of fired channels.
    pub fn reduce(&self, mask: u16) -> DetectionPattern {
        let [a_h, a_v, b_h, b_v] = Mode::ALL.map(|m| (mask & self.mask(m)).count_ones());
        DetectionPattern::new(a_h, a_v, b_h, b_v)
    }
}

impl fmt::Display for ChannelMap {
    /// One `channel=mode` line per channel.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ch in 0..CHANNELS {
            writeln!(f, "{ch}={}", self.mode(ch))?;
        }
        Ok(())
    }
}

impl FromStr for ChannelMap {
    type Err = Error;

    /// `channel=mode` entries separated by commas or newlines; `#` starts a comment.
    fn from_str(s: &str) -> Result<Self> {
        let mut modes: [Option<Mode>; CHANNELS as usize] = [None; CHANNELS as usize];
        for (i, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for entry in line.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                let loc = Location::Line(i + 1);
                let (ch, mode) = entry.split_once('=').ok_or_else(|| {
                    Error::parse(loc, format!("expected channel=mode, found {entry:?}"))
                })?;
                let ch: u8 = ch
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(loc, format!("bad channel {:?}: {e}", ch.trim())))?;
                if ch >= CHANNELS {
                    return Err(Error::parse(loc, format!("unknown channel {ch}")));
                }
                let mode: Mode = mode
                    .trim()
                    .parse()
                    .map_err(|e: Error| Error::parse(loc, e.to_string()))?;
                if modes[ch as usize].replace(mode).is_some() {
                    return Err(Error::parse(loc, format!("channel {ch} is assigned twice")));
                }
            }
        }
        let mut full = [Mode::AH; CHANNELS as usize];
        for (ch, m) in modes.iter().enumerate() {
            full[ch] = m.ok_or_else(|| Error::domain(format!("channel {ch} has no mode")))?;
        }
        Self::new(full)
    }
}

/// How coincidence windows are placed on the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowAnchor {
    /// Window `k` covers `[offset + k period, offset + k period + window)`.
    PulseClock { period_ps: u64, offset_ps: u64 },
    /// A click outside any open window opens `[t, t + window)`.
    FirstClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterConfig {
    pub anchor: WindowAnchor,
    pub window_ps: u64,
    /// Number of clock pulses in the acquisition. When set, pulses without
    /// clicks count as empty windows and later records fall outside.
    pub pulses: Option<u64>,
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self {
            anchor: WindowAnchor::PulseClock {
                period_ps: DEFAULT_PERIOD_PS,
                offset_ps: 0,
            },
            window_ps: DEFAULT_WINDOW_PS,
            pulses: None,
        }
    }
}

impl CounterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_ps == 0 {
            return Err(Error::domain("coincidence window must be positive"));
        }
        if let WindowAnchor::PulseClock { period_ps, .. } = self.anchor {
            if period_ps == 0 {
                return Err(Error::domain("pulse period must be positive"));
            }
            if self.window_ps > period_ps {
                return Err(Error::domain(format!(
                    "window of {} ps exceeds the pulse period of {period_ps} ps",
                    self.window_ps
                )));
            }
        }
        Ok(())
    }
}

/// Window counts indexed by the 16-bit mask of fired channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternHistogram {
    counts: Vec<u64>,
}

impl Default for PatternHistogram {
    fn default() -> Self {
        Self {
            counts: vec![0; MASKS],
        }
    }
}

impl PatternHistogram {
    pub fn count(&self, mask: u16) -> u64 {
        self.counts[mask as usize]
    }

    pub fn windows(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Non-zero entries in mask order.
    pub fn iter(&self) -> impl Iterator<Item = (u16, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(m, &n)| (m as u16, n))
    }

    pub fn merge(&mut self, other: &PatternHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn add(&mut self, mask: u16, n: u64) {
        self.counts[mask as usize] += n;
    }

    /// Totals per mode-level pattern.
    pub fn reduce(&self, map: &ChannelMap) -> BTreeMap<DetectionPattern, u64> {
        let mut out = BTreeMap::new();
        for (mask, n) in self.iter() {
            *out.entry(map.reduce(mask)).or_insert(0) += n;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountResult {
    pub config: CounterConfig,
    pub map: ChannelMap,
    pub histogram: PatternHistogram,
    pub records: u64,
    /// Repeat clicks of a channel inside one window, collapsed into the first.
    pub duplicates: u64,
    /// Records that fell between windows or after the last pulse.
    pub outside: u64,
}

impl CountResult {
    pub fn windows(&self) -> u64 {
        self.histogram.windows()
    }

    pub fn pattern_counts(&self) -> BTreeMap<DetectionPattern, u64> {
        self.histogram.reduce(&self.map)
    }
}

/// Streaming coincidence counter over time-ordered records.
#[derive(Debug, Clone)]
pub struct CoincidenceCounter {
    config: CounterConfig,
    map: ChannelMap,
    histogram: PatternHistogram,
    open: Option<(u64, u16)>,
    last_time: Option<u64>,
    records: u64,
    duplicates: u64,
    outside: u64,
    closed_windows: u64,
}

impl CoincidenceCounter {
    pub fn new(config: CounterConfig, map: ChannelMap) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            map,
            histogram: PatternHistogram::default(),
            open: None,
            last_time: None,
            records: 0,
            duplicates: 0,
            outside: 0,
            closed_windows: 0,
        })
    }

    fn close(&mut self) {
        if let Some((_, mask)) = self.open.take() {
            self.histogram.add(mask, 1);
            self.closed_windows += 1;
        }
    }

    /// Key of the window holding `t`, or `None` when it lies outside every window.
    fn window_of(&self, t: u64) -> Option<u64> {
        match self.config.anchor {
            WindowAnchor::PulseClock {
                period_ps,
                offset_ps,
            } => {
                let rel = t.checked_sub(offset_ps)?;
                let k = rel / period_ps;
                if rel % period_ps >= self.config.window_ps
                    || self.config.pulses.is_some_and(|p| k >= p)
                {
                    return None;
                }
                Some(k)
            }
            WindowAnchor::FirstClick => match self.open {
                Some((start, _)) if t - start < self.config.window_ps => Some(start),
                _ => Some(t),
            },
        }
    }

    pub fn push(&mut self, record: TimetagRecord) -> Result<()> {
        if let Some(last) = self.last_time {
            if record.time_ps < last {
                return Err(Error::domain(format!(
                    "record at {} ps arrived after {last} ps; the counter needs time order",
                    record.time_ps
                )));
            }
        }
        self.last_time = Some(record.time_ps);
        self.records += 1;
        let Some(key) = self.window_of(record.time_ps) else {
            self.outside += 1;
            return Ok(());
        };
        if self.open.is_some_and(|(k, _)| k != key) {
            self.close();
        }
        let (_, mask) = self.open.get_or_insert((key, 0));
        let bit = 1u16 << record.channel;
        if *mask & bit != 0 {
            self.duplicates += 1;
        }
        *mask |= bit;
        Ok(())
    }

    pub fn finish(mut self) -> CountResult {
        let last_key = self.open.map(|(k, _)| k);
        self.close();
        if let WindowAnchor::PulseClock { .. } = self.config.anchor {
            let pulses = self.config.pulses.or(last_key.map(|k| k + 1)).unwrap_or(0);
            self.histogram
                .add(0, pulses.saturating_sub(self.closed_windows));
        }
        CountResult {
            config: self.config,
            map: self.map,
            histogram: self.histogram,
            records: self.records,
            duplicates: self.duplicates,
            outside: self.outside,
        }
    }
}

/// Count a whole stream of records.
pub fn count_coincidences<I>(
    records: I,
    config: CounterConfig,
    map: ChannelMap,
) -> Result<CountResult>
where
    I: IntoIterator<Item = Result<TimetagRecord>>,
{
    let mut counter = CoincidenceCounter::new(config, map)?;
    for r in records {
        counter.push(r?)?;
    }
    Ok(counter.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(channel: u8, time_ps: u64) -> Result<TimetagRecord> {
        TimetagRecord::new(channel, time_ps)
    }

    #[test]
    fn default_map_groups_four_channels_per_mode() {
        let map = ChannelMap::default();
        assert_eq!(map.mask(Mode::AH), 0x000f);
        assert_eq!(map.mask(Mode::BV), 0xf000);
        assert_eq!(
            map.reduce(0b1000_0011_0001_0001),
            DetectionPattern::new(1, 1, 2, 1)
        );
        assert_eq!(map.to_string().parse::<ChannelMap>().unwrap(), map);
    }

    #[test]
    fn map_parsing() {
        let text = "# swapped\n0=b_v\n12=a_h\n1=ah, 2=a_h, 3=A_H\n4=a_v,5=a_v,6=a_v,7=a_v\n8=b_h,9=b_h,10=b_h,11=b_h\n13=b_v,14=b_v,15=b_v\n";
        let map: ChannelMap = text.parse().unwrap();
        assert_eq!(map.mode(0), Mode::BV);
        assert_eq!(map.mode(12), Mode::AH);
        assert_eq!(map.channels(Mode::AH), [1, 2, 3, 12]);
        let err = "0=a_h\n0=a_v".parse::<ChannelMap>().unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                location: Location::Line(2),
                ..
            }
        ));
        assert!("16=a_h".parse::<ChannelMap>().is_err());
        assert!("3=c_h".parse::<ChannelMap>().is_err());
        assert!("3".parse::<ChannelMap>().is_err());
        assert!("0=a_h".parse::<ChannelMap>().is_err());
        let unbalanced = (0..16)
            .map(|c| format!("{c}={}", if c < 5 { "a_h" } else { "b_v" }))
            .collect::<Vec<_>>()
            .join(",");
        assert!(unbalanced.parse::<ChannelMap>().is_err());
    }

    #[test]
    fn clicks_in_one_window_form_one_mask() {
        let res = count_coincidences(
            [rec(0, 100), rec(5, 900)],
            CounterConfig::default(),
            ChannelMap::default(),
        )
        .unwrap();
        assert_eq!(res.windows(), 1);
        assert_eq!(res.histogram.count(0b10_0001), 1);
        assert_eq!(res.pattern_counts()[&DetectionPattern::new(1, 1, 0, 0)], 1);
    }

    #[test]
    fn windows_split_on_pulse_boundaries() {
        let cfg = CounterConfig {
            pulses: Some(4),
            ..Default::default()
        };
        let records = [
            rec(0, 100),
            rec(1, 12_600),
            rec(2, 12_700),
            rec(2, 12_800),
            rec(3, 5_000),
            rec(4, 60_000),
        ];
        let err = count_coincidences(records, cfg, ChannelMap::default());
        assert!(err.is_err());
        let records = [
            rec(0, 100),
            rec(3, 5_000),
            rec(1, 12_600),
            rec(2, 12_700),
            rec(2, 12_800),
            rec(4, 60_000),
        ];
        let res = count_coincidences(records, cfg, ChannelMap::default()).unwrap();
        assert_eq!(res.windows(), 4);
        assert_eq!(res.histogram.count(0b1), 1);
        assert_eq!(res.histogram.count(0b110), 1);
        assert_eq!(res.histogram.count(0), 2);
        assert_eq!(res.duplicates, 1);
        assert_eq!(res.outside, 2);
    }

    #[test]
    fn first_click_anchoring() {
        let cfg = CounterConfig {
            anchor: WindowAnchor::FirstClick,
            window_ps: 1_000,
            pulses: None,
        };
        let records = [
            rec(0, 10_000),
            rec(1, 10_999),
            rec(2, 11_000),
            rec(3, 11_500),
        ];
        let res = count_coincidences(records, cfg, ChannelMap::default()).unwrap();
        assert_eq!(res.windows(), 2);
        assert_eq!(res.histogram.count(0b11), 1);
        assert_eq!(res.histogram.count(0b1100), 1);
    }

    #[test]
    fn invalid_configs() {
        let cfg = CounterConfig {
            window_ps: 20_000,
            ..Default::default()
        };
        assert!(CoincidenceCounter::new(cfg, ChannelMap::default()).is_err());
        let cfg = CounterConfig {
            window_ps: 0,
            ..Default::default()
        };
        assert!(CoincidenceCounter::new(cfg, ChannelMap::default()).is_err());
    }

    #[test]
    fn histograms_merge() {
        let mut a = PatternHistogram::default();
        a.add(3, 2);
        let mut b = PatternHistogram::default();
        b.add(3, 1);
        b.add(0, 5);
        a.merge(&b);
        assert_eq!(a.count(3), 3);
        assert_eq!(a.windows(), 8);
    }
}
