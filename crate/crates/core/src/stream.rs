use crate::error::{Error, Result};

/// Time-tagger resolution of recorded arrival times.
pub const TIMESTAMP_RESOLUTION_PS: u64 = 25;

pub const PS_PER_SECOND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Signal,
    Background,
    Dark,
    Merged,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Signal => "signal",
            Origin::Background => "background",
            Origin::Dark => "dark",
            Origin::Merged => "merged",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" => Ok(Origin::Signal),
            "background" => Ok(Origin::Background),
            "dark" => Ok(Origin::Dark),
            "merged" => Ok(Origin::Merged),
            other => Err(Error::format("origin", format!("unknown origin `{other}`"))),
        }
    }
}

/// Sorted photon arrival times in integer picoseconds over `[0, duration_ps]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampStream {
    timestamps: Vec<u64>,
    duration_ps: u64,
    origin: Origin,
}

impl TimestampStream {
    pub fn new(timestamps: Vec<u64>, duration_ps: u64, origin: Origin) -> Result<Self> {
        if let Some(index) = first_unsorted(&timestamps) {
            return Err(Error::UnsortedStream {
                index,
                previous: timestamps[index - 1],
                current: timestamps[index],
            });
        }
        if let Some(&last) = timestamps.last() {
            if last > duration_ps {
                return Err(Error::param(
                    "duration_ps",
                    format!("timestamp {last} ps lies beyond the stream duration {duration_ps} ps"),
                ));
            }
        }
        Ok(Self {
            timestamps,
            duration_ps,
            origin,
        })
    }

    pub(crate) fn from_sorted(timestamps: Vec<u64>, duration_ps: u64, origin: Origin) -> Self {
        debug_assert!(first_unsorted(&timestamps).is_none());
        Self {
            timestamps,
            duration_ps,
            origin,
        }
    }

    pub fn empty(duration_ps: u64, origin: Origin) -> Self {
        Self::from_sorted(Vec::new(), duration_ps, origin)
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_SECOND
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Mean event rate in counts per second.
    pub fn rate_per_s(&self) -> f64 {
        if self.duration_ps == 0 {
            0.0
        } else {
            self.len() as f64 / self.duration_s()
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.timestamps.windows(2).all(|w| w[0] < w[1])
    }

    /// Smallest gap between consecutive events, if there are at least two.
    pub fn min_gap_ps(&self) -> Option<u64> {
        self.timestamps.windows(2).map(|w| w[1] - w[0]).min()
    }

    /// Inter-arrival gaps in picoseconds.
    pub fn gaps_ps(&self) -> impl Iterator<Item = u64> + '_ {
        self.timestamps.windows(2).map(|w| w[1] - w[0])
    }
}

fn first_unsorted(ts: &[u64]) -> Option<usize> {
    ts.windows(2).position(|w| w[0] > w[1]).map(|i| i + 1)
}
