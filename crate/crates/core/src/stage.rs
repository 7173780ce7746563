use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Scored sleep stage as it appears in annotation files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SleepStage {
    W,
    R,
    N1,
    N2,
    N3,
}

impl SleepStage {
    pub fn class(self) -> Stage {
        match self {
            SleepStage::W => Stage::Wake,
            SleepStage::R => Stage::Rem,
            SleepStage::N1 | SleepStage::N2 | SleepStage::N3 => Stage::Nrem,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SleepStage::W => "W",
            SleepStage::R => "R",
            SleepStage::N1 => "N1",
            SleepStage::N2 => "N2",
            SleepStage::N3 => "N3",
        }
    }
}

impl FromStr for SleepStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "W" => Ok(SleepStage::W),
            "R" => Ok(SleepStage::R),
            "N1" => Ok(SleepStage::N1),
            "N2" => Ok(SleepStage::N2),
            "N3" => Ok(SleepStage::N3),
            other => Err(Error::InvalidInput(format!("unknown sleep stage label `{other}`"))),
        }
    }
}

/// The three classes the classifier separates. Declaration order is the
/// class index and the tie-break order for predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Wake,
    Rem,
    Nrem,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Wake, Stage::Rem, Stage::Nrem];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Wake => "Wake",
            Stage::Rem => "REM",
            Stage::Nrem => "NREM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Wake" => Ok(Stage::Wake),
            "REM" => Ok(Stage::Rem),
            "NREM" => Ok(Stage::Nrem),
            other => Err(Error::InvalidInput(format!("unknown stage class `{other}`"))),
        }
    }
}
