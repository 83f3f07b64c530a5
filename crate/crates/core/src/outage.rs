//! Outage probabilities of ARQ, HARQ with repetition combining (RR) and HARQ
//! with incremental redundancy (IR) over Rayleigh-faded links.
//!
//! A transmission over link `uv` sees instantaneous SNR `Γ·g` with
//! `g ~ Exp(mean δ²)`, so the SNR is exponential with rate `1 / (Γ δ²)`.

use crate::distributions::{
    erlang_cdf, shifted_exp_product_cdf, two_erlang_sum_cdf, ErlangSpec, ShiftedExpGroup, ShiftedExpProductSpec,
};
use crate::error::{domain, Result};
use crate::specfun::ContourSpec;

/// Average SNR and fading variance of one link. The SNR is stored linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    snr: f64,
    fading_variance: f64,
}

impl LinkParams {
    pub fn new(snr: f64, fading_variance: f64) -> Result<Self> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(domain(format!("link SNR must be positive and finite, got {snr}")));
        }
        if !(fading_variance > 0.0) || !fading_variance.is_finite() {
            return Err(domain(format!("fading variance must be positive, got {fading_variance}")));
        }
        Ok(LinkParams { snr, fading_variance })
    }

    /// Γ given in dB: Γ_linear = 10^{dB/10}.
    pub fn from_db(snr_db: f64, fading_variance: f64) -> Result<Self> {
        Self::new(db_to_linear(snr_db), fading_variance)
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    pub fn fading_variance(&self) -> f64 {
        self.fading_variance
    }

    /// Rate 1 / (Γ δ²) of the exponentially distributed received SNR.
    pub fn snr_rate(&self) -> f64 {
        1.0 / (self.snr * self.fading_variance)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Packet rate R in bits/s/Hz and its SNR threshold Θ = 2^R - 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateThreshold {
    rate: f64,
    theta: f64,
}

impl RateThreshold {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!("rate must be positive and finite, got {rate}")));
        }
        Ok(RateThreshold {
            rate,
            theta: rate.exp2() - 1.0,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Θ = 2^R - 1.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// 2^R, the threshold on a product of (1 + SNR) terms.
    pub fn product_threshold(&self) -> f64 {
        self.rate.exp2()
    }
}

/// Independent-decoding ARQ: 1 - exp(-Θ / (Γ δ²)).
pub fn arq_outage(link: LinkParams, rt: RateThreshold) -> f64 {
    -(-rt.theta() * link.snr_rate()).exp_m1()
}

/// HARQ-RR after `k1` attempts on one link: P{Σ SNRᵢ ≤ Θ}.
pub fn rr_source_outage(link: LinkParams, k1: u32, rt: RateThreshold) -> Result<f64> {
    erlang_cdf(ErlangSpec::new(k1, link.snr_rate())?, rt.theta())
}

/// HARQ-RR at the destination after `l` source and `k2` relay attempts.
pub fn rr_combined_outage(sd: LinkParams, rd: LinkParams, l: u32, k2: u32, rt: RateThreshold) -> Result<f64> {
    two_erlang_sum_cdf(
        ErlangSpec::new(l, sd.snr_rate())?,
        ErlangSpec::new(k2, rd.snr_rate())?,
        rt.theta(),
    )
}

/// HARQ-IR after `k1` attempts on one link: P{∏ (1 + SNRᵢ) ≤ 2^R}.
pub fn ir_source_outage(link: LinkParams, k1: u32, rt: RateThreshold, contour: &ContourSpec) -> Result<f64> {
    let spec = ShiftedExpProductSpec::single(k1, link.snr_rate(), 1.0)?;
    shifted_exp_product_cdf(&spec, rt.product_threshold(), contour)
}

/// HARQ-IR at the destination after `l` source and `k2` relay attempts.
pub fn ir_combined_outage(
    sd: LinkParams,
    rd: LinkParams,
    l: u32,
    k2: u32,
    rt: RateThreshold,
    contour: &ContourSpec,
) -> Result<f64> {
    let spec = ShiftedExpProductSpec::new(vec![
        ShiftedExpGroup {
            count: l,
            rate: sd.snr_rate(),
            shift: 1.0,
        },
        ShiftedExpGroup {
            count: k2,
            rate: rd.snr_rate(),
            shift: 1.0,
        },
    ])?;
    shifted_exp_product_cdf(&spec, rt.product_threshold(), contour)
}

/// The five outage events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Arq,
    RrSource,
    RrCombined,
    IrSource,
    IrCombined,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Arq,
        Scheme::RrSource,
        Scheme::RrCombined,
        Scheme::IrSource,
        Scheme::IrCombined,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Arq => "arq",
            Scheme::RrSource => "rr_source",
            Scheme::RrCombined => "rr_combined",
            Scheme::IrSource => "ir_source",
            Scheme::IrCombined => "ir_combined",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether the event involves the relay-destination link.
    pub fn is_combined(&self) -> bool {
        matches!(self, Scheme::RrCombined | Scheme::IrCombined)
    }
}

/// One fully specified outage event: which links and how many attempts.
///
/// `first` is the source-side link (sd, or sr for relay decoding); `second`
/// and `k2` are only used by the combined schemes. ARQ uses a single attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageQuery {
    pub scheme: Scheme,
    pub first: LinkParams,
    pub second: LinkParams,
    pub k1: u32,
    pub k2: u32,
    pub rt: RateThreshold,
}

impl OutageQuery {
    pub fn closed_form(&self, contour: &ContourSpec) -> Result<f64> {
        match self.scheme {
            Scheme::Arq => Ok(arq_outage(self.first, self.rt)),
            Scheme::RrSource => rr_source_outage(self.first, self.k1, self.rt),
            Scheme::RrCombined => rr_combined_outage(self.first, self.second, self.k1, self.k2, self.rt),
            Scheme::IrSource => ir_source_outage(self.first, self.k1, self.rt, contour),
            Scheme::IrCombined => ir_combined_outage(self.first, self.second, self.k1, self.k2, self.rt, contour),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(db: f64) -> LinkParams {
        LinkParams::from_db(db, 1.0).unwrap()
    }

    fn rt(r: f64) -> RateThreshold {
        RateThreshold::new(r).unwrap()
    }

    #[test]
    fn arq_examples() {
        let unit = LinkParams::new(1.0, 1.0).unwrap();
        assert!((arq_outage(unit, rt(1.0)) - (1.0 - (-1.0_f64).exp())).abs() < 1e-15);
        assert!(arq_outage(unit, rt(1e-12)) < 1e-11);
        assert!(arq_outage(LinkParams::new(1e12, 1.0).unwrap(), rt(1.0)) < 1e-11);
    }

    #[test]
    fn threshold_consistency() {
        for r in [0.1, 1.0, 2.5, 8.0] {
            let t = rt(r);
            assert!((t.theta() - (2f64.powf(r) - 1.0)).abs() <= 1e-12 * t.theta().max(1.0));
        }
        assert!(RateThreshold::new(0.0).is_err());
        assert!(LinkParams::new(0.0, 1.0).is_err());
        assert!(LinkParams::new(1.0, -1.0).is_err());
        assert!((link(20.0).snr() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn single_attempt_schemes_reduce_to_arq() {
        let c = ContourSpec::default();
        for db in [0.0, 5.0, 10.0, 20.0] {
            for r in [0.5, 1.0, 2.0, 4.0] {
                let arq = arq_outage(link(db), rt(r));
                assert!((rr_source_outage(link(db), 1, rt(r)).unwrap() - arq).abs() <= 1e-12);
                assert!((ir_source_outage(link(db), 1, rt(r), &c).unwrap() - arq).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn symmetric_rr_combined_is_single_erlang() {
        let l = link(7.0);
        for (k1, k2) in [(1, 1), (2, 3), (4, 4)] {
            let v = rr_combined_outage(l, l, k1, k2, rt(2.0)).unwrap();
            let e = erlang_cdf(ErlangSpec::new(k1 + k2, l.snr_rate()).unwrap(), rt(2.0).theta()).unwrap();
            assert!((v - e).abs() <= 1e-10);
        }
    }

    #[test]
    fn extra_attempts_only_help() {
        let c = ContourSpec::default();
        let (sd, rd) = (link(3.0), link(9.0));
        let r = rt(2.0);
        for k in 1..4 {
            assert!(rr_source_outage(sd, k + 1, r).unwrap() < rr_source_outage(sd, k, r).unwrap());
            assert!(ir_source_outage(sd, k + 1, r, &c).unwrap() <= ir_source_outage(sd, k, r, &c).unwrap());
            let rr = rr_combined_outage(sd, rd, k, 2, r).unwrap();
            assert!(rr <= rr_source_outage(sd, k, r).unwrap());
            let ir = ir_combined_outage(sd, rd, k, 2, r, &c).unwrap();
            assert!(ir <= ir_source_outage(sd, k, r, &c).unwrap());
            assert!(ir <= rr + 1e-8);
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
        assert_eq!(Scheme::parse("chase"), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn ir_never_worse_than_rr(
                sd_db in 0.0..20.0_f64, rd_db in 0.0..20.0_f64,
                r in 0.5..4.0_f64, l in 1u32..5, k2 in 1u32..5,
            ) {
                let c = ContourSpec::default();
                let (sd, rd) = (link(sd_db), link(rd_db));
                let rr = rr_combined_outage(sd, rd, l, k2, rt(r)).unwrap();
                let ir = ir_combined_outage(sd, rd, l, k2, rt(r), &c).unwrap();
                prop_assert!((0.0..=1.0).contains(&ir) && (0.0..=1.0).contains(&rr));
                prop_assert!(ir <= rr + 1e-8, "ir={ir} rr={rr}");
            }

            #[test]
            fn outage_decreases_with_snr_and_increases_with_rate(
                db in 0.0..19.0_f64, r in 0.5..3.5_f64, k in 1u32..5,
            ) {
                let c = ContourSpec::default();
                let lo = ir_source_outage(link(db), k, rt(r), &c).unwrap();
                let hi_snr = ir_source_outage(link(db + 1.0), k, rt(r), &c).unwrap();
                let hi_rate = ir_source_outage(link(db), k, rt(r + 0.5), &c).unwrap();
                prop_assert!(hi_snr <= lo + 1e-8);
                prop_assert!(hi_rate >= lo - 1e-8);
                let lo = rr_source_outage(link(db), k, rt(r)).unwrap();
                prop_assert!(rr_source_outage(link(db + 1.0), k, rt(r)).unwrap() < lo);
                prop_assert!(rr_source_outage(link(db), k, rt(r + 0.5)).unwrap() > lo);
            }
        }
    }
}
