use uwnet_tensor::{Error, Result};

/// Which architecture features are enabled. The five named configurations
/// of the comparison harness are baseline (none), a (pyramid pooling with
/// the trident input), b (deformable fusion), c (a + b) and full (all
/// three, adding trident refinement blocks).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantSpec {
    pub tdconv: bool,
    pub tdsppf: bool,
    pub dpafpn: bool,
}

pub const BASELINE: VariantSpec = VariantSpec { tdconv: false, tdsppf: false, dpafpn: false };
pub const MODEL_A: VariantSpec = VariantSpec { tdconv: false, tdsppf: true, dpafpn: false };
pub const MODEL_B: VariantSpec = VariantSpec { tdconv: false, tdsppf: false, dpafpn: true };
pub const MODEL_C: VariantSpec = VariantSpec { tdconv: false, tdsppf: true, dpafpn: true };
pub const FULL: VariantSpec = VariantSpec { tdconv: true, tdsppf: true, dpafpn: true };

/// The ablation sweep order: baseline, a, b, c, full.
pub const ALL_VARIANTS: [VariantSpec; 5] = [BASELINE, MODEL_A, MODEL_B, MODEL_C, FULL];

impl VariantSpec {
    pub fn parse(name: &str) -> Result<VariantSpec> {
        match name {
            "baseline" => Ok(BASELINE),
            "a" => Ok(MODEL_A),
            "b" => Ok(MODEL_B),
            "c" => Ok(MODEL_C),
            "full" => Ok(FULL),
            other => Err(Error::invalid(
                "variant",
                format!("unknown variant '{other}', expected one of baseline|a|b|c|full"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match *self {
            BASELINE => "baseline",
            MODEL_A => "a",
            MODEL_B => "b",
            MODEL_C => "c",
            FULL => "full",
            _ => "custom",
        }
    }

    /// Human-readable module composition, e.g. "tdsppf+dpafpn".
    pub fn composition(&self) -> String {
        let mut parts = Vec::new();
        if self.tdconv {
            parts.push("tdconv");
        }
        if self.tdsppf {
            parts.push("tdsppf");
        }
        if self.dpafpn {
            parts.push("dpafpn");
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }
}
