use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_AGE: u8 = 120;

macro_rules! text_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Validation(format!(
                        "`{}` is not a valid {}", other, stringify!($name)
                    ))),
                }
            }
        }
    };
}

text_enum!(Sex { Male => "male", Female => "female" });
text_enum!(TestResult { Positive => "positive", Negative => "negative" });
text_enum!(
    /// How the diagnosis was confirmed: by a physician or by an RT-PCR test.
    ConfirmationMethod { Clinical => "clinical", Rtpcr => "rtpcr" }
);
text_enum!(Outcome { Recovered => "recovered", Deceased => "deceased" });

/// One patient row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub age: u8,
    pub sex: Sex,
    pub test_result: TestResult,
    pub confirmation_method: ConfirmationMethod,
    pub ventilator: bool,
    pub cough: bool,
    pub apnea: bool,
    pub carcinoma: bool,
    pub healthcare_staff: bool,
    pub icu_hospitalization: bool,
    pub hospitalization_days: Option<u32>,
    /// Additional named symptom flags beyond the fixed clinical columns.
    pub extra_symptoms: BTreeMap<String, bool>,
    pub outcome: Outcome,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        if self.age > MAX_AGE {
            return Err(Error::Validation(format!("record `{}`: age {} outside [0, {MAX_AGE}]", self.id, self.age)));
        }
        if self.id.is_empty() {
            return Err(Error::Validation(String::from("record with empty id")));
        }
        Ok(())
    }

    pub fn flag(&self, flag: Flag) -> bool {
        match flag {
            Flag::Ventilator => self.ventilator,
            Flag::Cough => self.cough,
            Flag::Apnea => self.apnea,
            Flag::Carcinoma => self.carcinoma,
            Flag::HealthcareStaff => self.healthcare_staff,
            Flag::IcuHospitalization => self.icu_hospitalization,
        }
    }

    pub fn set_flag(&mut self, flag: Flag, value: bool) {
        let slot = match flag {
            Flag::Ventilator => &mut self.ventilator,
            Flag::Cough => &mut self.cough,
            Flag::Apnea => &mut self.apnea,
            Flag::Carcinoma => &mut self.carcinoma,
            Flag::HealthcareStaff => &mut self.healthcare_staff,
            Flag::IcuHospitalization => &mut self.icu_hospitalization,
        };
        *slot = value;
    }

    pub fn is_deceased(&self) -> bool {
        self.outcome == Outcome::Deceased
    }
}

text_enum!(
    /// The fixed boolean clinical columns, in table order.
    Flag {
        Ventilator => "ventilator",
        Cough => "cough",
        Apnea => "apnea",
        Carcinoma => "carcinoma",
        HealthcareStaff => "healthcare_staff",
        IcuHospitalization => "icu_hospitalization",
    }
);
