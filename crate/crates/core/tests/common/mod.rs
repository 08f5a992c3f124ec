#![allow(dead_code)]

use std::path::PathBuf;

use borrowsize::{GammaMixtureHyperparams, HistoricalSource, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scenario.json"))
}

pub fn load(name: &str) -> Scenario {
    Scenario::from_path(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const SIGMA0_SQ: f64 = 3.69 * 3.69;
pub const CONFIG_WEIGHTS: [f64; 5] = [0.2, 0.4, 0.8, 0.6, 0.7];

pub struct Config {
    pub name: &'static str,
    pub theta: [f64; 5],
    pub tau_sq: [f64; 5],
    pub transformed: [f64; 5],
    pub prior_mean: f64,
    pub prior_var: f64,
    pub n: u64,
    /// (%Eff, %Fut) at true effect 1, then at 0.
    pub sim: [(f64, f64); 2],
}

pub const CONFIGS: [Config; 4] = [
    Config {
        name: "A",
        theta: [0.10, 0.24, 0.37, 0.0, -0.05],
        tau_sq: [1.25, 0.73, 0.92, 1.29, 0.66],
        transformed: [3.05e-3, 4.76e-3, 3.48e-2, 1.86e-2, 1.49e-2],
        prior_mean: 0.131,
        prior_var: 0.405,
        n: 204,
        sim: [(49.3, 50.7), (2.6, 97.4)],
    },
    Config {
        name: "B",
        theta: [0.0, -0.05, 2.14, 0.37, 1.10],
        tau_sq: [1.29, 0.66, 0.5, 0.92, 0.75],
        transformed: [3.14e-3, 4.31e-3, 1.93e-2, 1.34e-2, 1.69e-2],
        prior_mean: 0.515,
        prior_var: 0.358,
        n: 186,
        sim: [(66.0, 34.0), (7.3, 92.7)],
    },
    Config {
        name: "C",
        theta: [1.10, 0.37, -0.05, 2.14, 0.0],
        tau_sq: [0.75, 0.92, 0.66, 0.5, 1.29],
        transformed: [1.84e-3, 5.98e-3, 2.53e-2, 7.33e-3, 2.86e-2],
        prior_mean: 1.015,
        prior_var: 0.325,
        n: 170,
        sim: [(88.7, 11.3), (29.2, 70.8)],
    },
    Config {
        name: "D",
        theta: [1.10, 2.14, 1.07, 0.60, 0.85],
        tau_sq: [0.75, 0.5, 0.82, 0.89, 0.26],
        transformed: [1.84e-3, 3.27e-3, 3.12e-2, 1.29e-2, 5.96e-3],
        prior_mean: 1.276,
        prior_var: 0.242,
        n: 112,
        sim: [(98.7, 1.3), (79.8, 20.2)],
    },
];

impl Config {
    pub fn sources(&self) -> Vec<HistoricalSource> {
        (0..5)
            .map(|q| {
                HistoricalSource::new(format!("{}", q + 1), self.theta[q], self.tau_sq[q]).unwrap()
            })
            .collect()
    }
}

pub fn design_hyper() -> GammaMixtureHyperparams {
    GammaMixtureHyperparams::new(1.01, 1.01, 1e6, 1.0).unwrap()
}

pub const ALZ_THETA: [f64; 7] = [4.90, 0.0, 6.0, -1.8, 3.29, 1.39, 6.8];
pub const ALZ_TAU_SQ: [f64; 7] = [4.21, 0.27, 0.76, 1.89, 0.77, 0.04, 5.81];
pub const ALZ_RAW: [f64; 7] = [0.65, 0.90, 0.75, 0.75, 0.40, 0.95, 0.50];
pub const ALZ_PUBLISHED: [f64; 7] = [
    7.66e-3, 2.37e-3, 2.26e-3, 5.58e-3, 5.10e-4, 7.86e-4, 5.69e-3,
];

/// Standard normal quantile by Wichura's AS 241 (PPND16), written out
/// separately from the library path.
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_5 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446_0e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
