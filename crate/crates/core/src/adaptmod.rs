//! Closed-form bit error rates and channel-adaptive modulation-order
//! selection.
//!
//! Bit `i` may use order `M` whenever its analytic flip probability stays
//! below `beta_M * alpha_i`. Rearranged, that is a threshold `tau_{M,i}` on
//! `sqrt(SNR)`, and each bit takes the highest order whose threshold is met.

use crate::bsec::{neighbour_factor, RobustnessProfile};
use crate::constellation::ModOrder;
use crate::error::{Error, Result};
use crate::numerics::{q_inverse, q_unchecked};

/// Per-order tightening factors `beta_M` applied to `alpha_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaAdjusters {
    betas: [f64; 3],
}

impl BetaAdjusters {
    pub fn new(beta2: f64, beta4: f64, beta6: f64) -> Result<Self> {
        for b in [beta2, beta4, beta6] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::config(format!("beta adjuster {b} outside (0, 1]")));
            }
        }
        Ok(Self {
            betas: [beta2, beta4, beta6],
        })
    }

    /// Values paired with a constant `alpha = 0.4`.
    pub fn homogeneous() -> Self {
        Self {
            betas: [0.6599, 0.6003, 0.5553],
        }
    }

    /// Values paired with the linearly rising `alpha` profile.
    pub fn heterogeneous() -> Self {
        Self { betas: [1.0, 0.6, 0.5] }
    }

    pub fn get(&self, order: ModOrder) -> f64 {
        match order {
            ModOrder::Qam4 => self.betas[0],
            ModOrder::Qam16 => self.betas[1],
            ModOrder::Qam64 => self.betas[2],
        }
    }
}

/// Approximate flip probability of `order` at `snr` with erasure offset `a`.
pub fn ber_approx(order: ModOrder, snr: f64, a: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::domain(format!("SNR {snr} must be positive")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("boundary offset {a} outside [0, 1]")));
    }
    if snr.is_infinite() {
        return Ok(0.0);
    }
    let scale = (3.0 * snr / (order.size() as f64 - 1.0)).sqrt();
    Ok(neighbour_factor(order) * q_unchecked((1.0 + a) * scale))
}

/// Threshold on `sqrt(SNR)` above which `order` keeps bit flips below
/// `beta_M * alpha`. Zero when the bound holds at every SNR.
pub fn tau(order: ModOrder, alpha: f64, a: f64, betas: &BetaAdjusters) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::domain(format!("boundary offset {a} outside [0, 1]")));
    }
    let target = betas.get(order) * alpha / neighbour_factor(order);
    if !(target > 0.0) {
        return Err(Error::domain(format!(
            "Q-inverse argument {target} must be positive (alpha = {alpha})"
        )));
    }
    if target >= 1.0 {
        return Ok(0.0);
    }
    let root = ((order.size() as f64 - 1.0) / 3.0).sqrt();
    Ok((root * q_inverse(target)? / (1.0 + a)).max(0.0))
}

/// `[tau_2, tau_4, tau_6]` for one bit.
pub fn thresholds(alpha: f64, a: f64, betas: &BetaAdjusters) -> Result<[f64; 3]> {
    Ok([
        tau(ModOrder::Qam4, alpha, a, betas)?,
        tau(ModOrder::Qam16, alpha, a, betas)?,
        tau(ModOrder::Qam64, alpha, a, betas)?,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderSelection {
    pub order: ModOrder,
    /// Even 4-QAM misses its bound at this SNR.
    pub below_floor: bool,
}

/// Highest order whose threshold `sqrt(snr)` meets.
pub fn select_order(snr: f64, alpha: f64, a: f64, betas: &BetaAdjusters) -> Result<OrderSelection> {
    if !(snr >= 0.0) {
        return Err(Error::domain(format!("SNR {snr} must be non-negative")));
    }
    let [t2, t4, t6] = thresholds(alpha, a, betas)?;
    select_from_thresholds(snr.sqrt(), [t2, t4, t6])
}

fn select_from_thresholds(root_snr: f64, [t2, t4, t6]: [f64; 3]) -> Result<OrderSelection> {
    if !(t2 <= t4 && t4 <= t6) {
        return Err(Error::config(format!(
            "thresholds out of order: tau2 = {t2}, tau4 = {t4}, tau6 = {t6}"
        )));
    }
    let (order, below_floor) = if root_snr >= t6 {
        (ModOrder::Qam64, false)
    } else if root_snr >= t4 {
        (ModOrder::Qam16, false)
    } else {
        (ModOrder::Qam4, root_snr < t2)
    };
    Ok(OrderSelection { order, below_floor })
}

/// A run of consecutive bits sharing one modulation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModGroup {
    pub order: ModOrder,
    pub bits: Vec<usize>,
    /// Zero bits appended so the group fills whole symbols.
    pub padding: usize,
}

impl ModGroup {
    pub fn symbols(&self) -> usize {
        (self.bits.len() + self.padding) / self.order.bits()
    }
}

/// Per-bit orders and the resulting symbol layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPlan {
    pub orders: Vec<ModOrder>,
    pub groups: Vec<ModGroup>,
    pub symbol_count: usize,
    pub padding_bits: usize,
    /// Bits whose 4-QAM threshold was not met.
    pub below_floor_bits: usize,
}

impl ModPlan {
    /// Groups maximal runs of equal orders and pads each to whole symbols.
    pub fn from_orders(orders: Vec<ModOrder>) -> Self {
        let mut groups: Vec<ModGroup> = Vec::new();
        for (i, &order) in orders.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.order == order => g.bits.push(i),
                _ => groups.push(ModGroup {
                    order,
                    bits: vec![i],
                    padding: 0,
                }),
            }
        }
        for g in &mut groups {
            let m = g.order.bits();
            g.padding = (m - g.bits.len() % m) % m;
        }
        let symbol_count = groups.iter().map(ModGroup::symbols).sum();
        let padding_bits = groups.iter().map(|g| g.padding).sum();
        Self {
            orders,
            groups,
            symbol_count,
            padding_bits,
            below_floor_bits: 0,
        }
    }

    /// Every bit at the same order.
    pub fn fixed(order: ModOrder, n_bits: usize) -> Self {
        Self::from_orders(vec![order; n_bits])
    }

    pub fn n_bits(&self) -> usize {
        self.orders.len()
    }

    /// Distinct orders present, ascending.
    pub fn composition(&self) -> Vec<ModOrder> {
        let mut c: Vec<ModOrder> = self.groups.iter().map(|g| g.order).collect();
        c.sort();
        c.dedup();
        c
    }
}

/// Adaptive plan for the whole latent vector at `snr`.
pub fn plan_assignment(snr: f64, profile: &RobustnessProfile, betas: &BetaAdjusters) -> Result<ModPlan> {
    if !(snr >= 0.0) {
        return Err(Error::domain(format!("SNR {snr} must be non-negative")));
    }
    let root = snr.sqrt();
    let mut below = 0;
    let orders = profile
        .alphas()
        .iter()
        .zip(profile.a_offsets())
        .map(|(&alpha, &a)| {
            let sel = select_from_thresholds(root, thresholds(alpha, a, betas)?)?;
            below += sel.below_floor as usize;
            Ok(sel.order)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut plan = ModPlan::from_orders(orders);
    plan.below_floor_bits = below;
    Ok(plan)
}

/// Information bits per transmitted symbol.
pub fn spectral_efficiency(plan: &ModPlan, n_bits: usize) -> f64 {
    n_bits as f64 / plan.symbol_count as f64
}

/// Ergodic capacity (bits per channel use) when `sqrt(SNR) ~ Uniform[g1, g2]`.
pub fn capacity_uniform(g1: f64, g2: f64) -> Result<f64> {
    if !(g1 >= 0.0 && g2 > g1 && g2.is_finite()) {
        return Err(Error::domain(format!("capacity needs 0 <= g1 < g2 (got {g1}, {g2})")));
    }
    let log_ratio = g2 * (g2 * g2).ln_1p() - g1 * (g1 * g1).ln_1p();
    let numerator = log_ratio + 2.0 * (g2.atan() - g1.atan()) - 2.0 * (g2 - g1);
    Ok(numerator / (std::f64::consts::LN_2 * (g2 - g1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q_function;

    #[test]
    fn ber_reference_values() {
        assert!((ber_approx(ModOrder::Qam4, 1.0, 0.0).unwrap() - 0.1586553).abs() < 5e-8);
        assert!((ber_approx(ModOrder::Qam4, 1.0, 0.5).unwrap() - 0.0668072).abs() < 5e-8);
        assert_eq!(ber_approx(ModOrder::Qam64, f64::INFINITY, 0.5).unwrap(), 0.0);
        assert!(ber_approx(ModOrder::Qam64, 1e6, 0.5).unwrap() < 1e-100);
        assert!(ber_approx(ModOrder::Qam4, -1.0, 0.5).is_err());
    }

    #[test]
    fn tau_simplified_forms() {
        let betas = BetaAdjusters::new(0.8, 0.7, 0.6).unwrap();
        for alpha in [0.05, 0.2, 0.3, 0.45] {
            for a in [0.0, 0.5, 1.0] {
                let t2 = q_inverse(0.8 * alpha).unwrap() / (1.0 + a);
                let t4 = 5f64.sqrt() * q_inverse(4.0 * 0.7 * alpha / 3.0).unwrap() / (1.0 + a);
                let t6 = 21f64.sqrt() * q_inverse(12.0 * 0.6 * alpha / 7.0).unwrap() / (1.0 + a);
                let got = thresholds(alpha, a, &betas).unwrap();
                for (g, want) in got.iter().zip([t2, t4, t6]) {
                    assert!((g - want.max(0.0)).abs() < 1e-12, "alpha {alpha}, a {a}");
                }
            }
        }
    }

    #[test]
    fn tau_reference_values() {
        let hom = BetaAdjusters::homogeneous();
        let t2 = tau(ModOrder::Qam4, 0.4, 0.5, &hom).unwrap();
        // scipy: norm.isf(0.26396) / 1.5 = 0.420790
        assert!((t2 - 0.420_790).abs() < 1e-5);
        assert!((t2 - 0.4209).abs() < 2e-4);
        assert!((20.0 * t2.log10() - -7.52).abs() < 0.01);

        let het = BetaAdjusters::heterogeneous();
        let [t2, t4, t6] = thresholds(0.45, 0.5, &het).unwrap();
        assert!((t2 - 0.0838).abs() < 1e-4);
        assert!((t4 - 0.5344).abs() < 1e-4);
        assert!((t6 - 0.8875).abs() < 1e-4);
    }

    #[test]
    fn tau_edge_cases() {
        let betas = BetaAdjusters::heterogeneous();
        assert!(tau(ModOrder::Qam4, 0.0, 0.5, &betas).is_err());
        let loose = BetaAdjusters::new(1.0, 1.0, 1.0).unwrap();
        // 12/7 * 0.5 > 1: bound met at every SNR
        assert_eq!(tau(ModOrder::Qam64, 0.5, 0.5, &loose).unwrap(), 0.0);
        assert!(BetaAdjusters::new(0.0, 0.5, 0.5).is_err());
        assert!(BetaAdjusters::new(1.1, 0.5, 0.5).is_err());
    }

    #[test]
    fn select_examples() {
        let het = BetaAdjusters::heterogeneous();
        let s = select_order(0.49, 0.45, 0.5, &het).unwrap();
        assert_eq!(s.order, ModOrder::Qam16);
        assert_eq!(select_order(100.0, 0.45, 0.5, &het).unwrap().order, ModOrder::Qam64);
        let s = select_order(0.04, 0.45, 0.5, &het).unwrap();
        assert_eq!(
            s,
            OrderSelection {
                order: ModOrder::Qam4,
                below_floor: false
            }
        );
        let s = select_order(1e-4, 0.45, 0.5, &het).unwrap();
        assert!(s.below_floor);
        assert_eq!(s.order, ModOrder::Qam4);
    }

    #[test]
    fn select_rejects_disordered_thresholds() {
        // a large beta6 pulls tau6 below tau4
        let odd = BetaAdjusters::new(0.1, 0.1, 1.0).unwrap();
        assert!(matches!(select_order(1.0, 0.3, 0.5, &odd), Err(Error::Config(_))));
    }

    #[test]
    fn threshold_ordering_over_alpha_grid() {
        for betas in [BetaAdjusters::homogeneous(), BetaAdjusters::heterogeneous()] {
            for k in 0..=160 {
                let alpha = 0.29 + 0.001 * k as f64;
                let [t2, t4, t6] = thresholds(alpha, 0.5, &betas).unwrap();
                assert!(t2 <= t4 && t4 <= t6, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn heterogeneous_interleaving() {
        let betas = BetaAdjusters::heterogeneous();
        let first = thresholds(0.29, 0.5, &betas).unwrap();
        let last = thresholds(0.45, 0.5, &betas).unwrap();
        assert!(first[0] <= last[1]);
        assert!(last[1] <= last[2]);
        assert!(last[2] <= first[1]);
        assert!(first[1] <= first[2]);
    }

    #[test]
    fn selection_properties() {
        let betas = BetaAdjusters::heterogeneous();
        for alpha in [0.29, 0.35, 0.4, 0.45] {
            let mut prev = ModOrder::Qam4;
            for k in 0..400 {
                let snr = 10f64.powf(-2.0 + k as f64 * 0.01);
                let sel = select_order(snr, alpha, 0.5, &betas).unwrap();
                assert!(sel.order >= prev);
                prev = sel.order;
                let [t2, ..] = thresholds(alpha, 0.5, &betas).unwrap();
                if snr.sqrt() >= t2 {
                    let ber = ber_approx(sel.order, snr, 0.5).unwrap();
                    assert!(ber <= betas.get(sel.order) * alpha * (1.0 + 1e-9));
                }
            }
        }
        // at fixed SNR, higher alpha never gets a lower order
        for snr in [0.3, 0.8, 1.5, 3.0] {
            let mut prev = ModOrder::Qam4;
            for k in 0..=16 {
                let alpha = 0.29 + 0.01 * k as f64;
                let o = select_order(snr, alpha, 0.5, &betas).unwrap().order;
                assert!(o >= prev);
                prev = o;
            }
        }
    }

    #[test]
    fn plan_arithmetic() {
        let p = ModPlan::fixed(ModOrder::Qam4, 96);
        assert_eq!((p.symbol_count, p.padding_bits), (48, 0));
        assert_eq!(spectral_efficiency(&p, 96), 2.0);

        let p = ModPlan::fixed(ModOrder::Qam64, 96);
        assert_eq!(spectral_efficiency(&p, 96), 6.0);

        let p = ModPlan::fixed(ModOrder::Qam16, 5);
        assert_eq!(p.groups.len(), 1);
        assert_eq!((p.groups[0].padding, p.symbol_count), (3, 2));

        let mut orders = vec![ModOrder::Qam4; 48];
        orders.extend(vec![ModOrder::Qam16; 48]);
        let p = ModPlan::from_orders(orders);
        assert_eq!(p.symbol_count, 36);
        assert!((spectral_efficiency(&p, 96) - 96.0 / 36.0).abs() < 1e-15);
        assert_eq!(p.composition(), vec![ModOrder::Qam4, ModOrder::Qam16]);
    }

    #[test]
    fn plan_groups_cover_every_bit_once() {
        let prof = RobustnessProfile::heterogeneous(96);
        let betas = BetaAdjusters::heterogeneous();
        for k in 0..60 {
            let snr = 10f64.powf((-10.0 + k as f64 * 0.5) / 10.0);
            let plan = plan_assignment(snr, &prof, &betas).unwrap();
            let mut seen: Vec<usize> = plan.groups.iter().flat_map(|g| g.bits.clone()).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..96).collect::<Vec<_>>());
            assert!(plan.groups.len() <= 3);
            assert!(plan.padding_bits <= 10);
            for g in &plan.groups {
                assert_eq!((g.bits.len() + g.padding) % g.order.bits(), 0);
                assert!(g.bits.iter().all(|&b| plan.orders[b] == g.order));
            }
            assert_eq!(
                plan.symbol_count,
                plan.groups.iter().map(ModGroup::symbols).sum::<usize>()
            );
            // low-alpha bits never use a higher order than high-alpha bits
            assert!(plan.orders.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn capacity_values() {
        let c = capacity_uniform(0.37, 2.5).unwrap();
        assert!((c - 1.57).abs() < 0.005, "C = {c}");
        for g in [0.2, 1.0, 3.0] {
            let c = capacity_uniform(g, g + 1e-6).unwrap();
            assert!((c - (1.0 + g * g).log2()).abs() < 1e-5);
        }
        let mut prev = 0.0;
        for k in 1..50 {
            let c = capacity_uniform(0.37, 0.37 + 0.1 * k as f64).unwrap();
            assert!(c > prev);
            prev = c;
        }
        assert!(capacity_uniform(1.0, 1.0).is_err());
        assert!(capacity_uniform(-0.1, 1.0).is_err());
        // q_function is re-exported for callers needing the raw tail
        assert!(q_function(0.0).unwrap() == 0.5);
    }
}
