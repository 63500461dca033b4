//! Timetag streams from a sixteen-channel counter: parsing, pulse-window
//! coincidence counting, reduction to per-mode click patterns and a
//! synthetic stream generator.
//!
//! Text streams hold `channel,time_ps` lines with `#` comments. Binary streams
//! are headerless 9-byte records: one channel byte followed by the time in
//! picoseconds as a little-endian `u64`.

mod counter;
mod records;
mod synth;

pub use counter::{
    count_coincidences, ChannelMap, CoincidenceCounter, CountResult, CounterConfig,
    PatternHistogram, WindowAnchor, CHANNELS_PER_MODE, DEFAULT_PERIOD_PS, DEFAULT_WINDOW_PS,
};
pub use records::{
    parse_timetags, read_timetags, write_binary, write_text, Format, ParseOptions, TimetagRecord,
    TimetagStream, BINARY_RECORD_LEN, CHANNELS,
};
pub use synth::{generate_synthetic_timetags, SyntheticConfig};
