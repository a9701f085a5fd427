use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Image / lesion category. Only `Benign` and `Malignant` are lesion classes;
/// `Normal` images carry no instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Benign,
    Malignant,
    Normal,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Benign, ClassLabel::Malignant, ClassLabel::Normal];
    pub const LESIONS: [ClassLabel; 2] = [ClassLabel::Benign, ClassLabel::Malignant];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Benign => "benign",
            ClassLabel::Malignant => "malignant",
            ClassLabel::Normal => "normal",
        }
    }

    pub fn is_lesion(self) -> bool {
        self != ClassLabel::Normal
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benign" => Ok(ClassLabel::Benign),
            "malignant" => Ok(ClassLabel::Malignant),
            "normal" => Ok(ClassLabel::Normal),
            other => Err(Error::InvalidArgument(format!("unknown class label `{other}`"))),
        }
    }
}
