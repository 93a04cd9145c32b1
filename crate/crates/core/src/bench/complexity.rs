//! Closed-form complexity and energy models.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlopScheme {
    Proposed,
    Ablation,
    Ref8,
    Ref9,
}

impl FlopScheme {
    pub const ALL: [FlopScheme; 4] = [FlopScheme::Proposed, FlopScheme::Ablation, FlopScheme::Ref8, FlopScheme::Ref9];

    pub fn as_str(self) -> &'static str {
        match self {
            FlopScheme::Proposed => "proposed",
            FlopScheme::Ablation => "ablation",
            FlopScheme::Ref8 => "ref8",
            FlopScheme::Ref9 => "ref9",
        }
    }
}

/// Receiver FLOPs per frame.
///
/// * proposed: `3N + 7N^2 + 3N^2 M + 2NM + 9 La N + floor(La/3) floor(N/3) / 4 + 2 La N^2 + 2 La^2 N^2`
/// * ablation: the proposed count without the sensor and the refinement network,
///   `3N + 3N^2 + 3N^2 M + 2NM + 2 La N^2 + 2 La^2 N^2`
/// * ref8: `6N + 6NM + 6 La N^2 + 6 La N^2 M`
/// * ref9: `4 La N M + 32 M La N + 32 M^2`
pub fn flops(scheme: FlopScheme, n: u64, m: u64, la: u64) -> f64 {
    let (n, m, la) = (n as f64, m as f64, la as f64);
    let n2 = n * n;
    match scheme {
        FlopScheme::Proposed => {
            let pooled = (la / 3.0).floor() * (n / 3.0).floor();
            3.0 * n + 7.0 * n2 + 3.0 * n2 * m + 2.0 * n * m + 9.0 * la * n + pooled / 4.0
                + 2.0 * la * n2
                + 2.0 * la * la * n2
        }
        FlopScheme::Ablation => {
            3.0 * n + 3.0 * n2 + 3.0 * n2 * m + 2.0 * n * m + 2.0 * la * n2 + 2.0 * la * la * n2
        }
        FlopScheme::Ref8 => 6.0 * n + 6.0 * n * m + 6.0 * la * n2 + 6.0 * la * n2 * m,
        FlopScheme::Ref9 => 4.0 * la * n * m + 32.0 * m * la * n + 32.0 * m * m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBudget {
    pub superimposed: f64,
    pub non_superimposed: f64,
    pub saved: f64,
}

impl EnergyBudget {
    pub fn saved_fraction(&self) -> f64 {
        self.saved / self.non_superimposed
    }
}

/// Uplink energy with the CSI superimposed on `M` data symbols versus sent
/// on `N` extra symbols.
pub fn energy_saved(n: u64, e_u: f64, t_sym: f64, m: u64) -> EnergyBudget {
    let per = e_u * t_sym;
    EnergyBudget {
        superimposed: m as f64 * per,
        non_superimposed: (m + n) as f64 * per,
        saved: n as f64 * per,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(flops(FlopScheme::Ref8, 64, 512, 5), 63_234_432.0);
        assert_eq!(flops(FlopScheme::Ref9, 64, 512, 5), 14_286_848.0);
        assert_eq!(flops(FlopScheme::Proposed, 64, 512, 5), 6_634_501.25);
        assert_eq!(flops(FlopScheme::Ablation, 64, 512, 5), 6_634_501.25 - 4.0 * 4096.0 - 2880.0 - 5.25);
    }

    #[test]
    fn term_by_term_oracle() {
        let (n, m, la) = (8u64, 16u64, 4u64);
        let ref8 = 6 * n + 6 * n * m + 6 * la * n * n + 6 * la * n * n * m;
        assert_eq!(flops(FlopScheme::Ref8, n, m, la), ref8 as f64);
        let ref9 = 4 * la * n * m + 32 * m * la * n + 32 * m * m;
        assert_eq!(flops(FlopScheme::Ref9, n, m, la), ref9 as f64);
        let int_part = 3 * n + 7 * n * n + 3 * n * n * m + 2 * n * m + 9 * la * n + 2 * la * n * n + 2 * la * la * n * n;
        assert_eq!(flops(FlopScheme::Proposed, n, m, la), int_part as f64 + (1 * 2) as f64 / 4.0);
    }

    #[test]
    fn energy() {
        let e = energy_saved(64, 1.0, 1.0, 512);
        assert_eq!((e.superimposed, e.non_superimposed, e.saved), (512.0, 576.0, 64.0));
        assert_eq!(e.saved_fraction(), 1.0 / 9.0);
        assert_eq!(energy_saved(0, 2.0, 3.0, 10).saved, 0.0);
        assert_eq!(energy_saved(10, 2.0, 3.0, 10).saved, 60.0);
    }
}
