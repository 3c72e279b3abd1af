mod common;

use num_complex::Complex64;
use tddnet::chanmodel::FrequencyResponse;
use tddnet::rffront::{oracle_reciprocity, RfChainSet};
use tddnet::Error;

#[test]
fn oracle_calibration_recovers_downlink() {
    let worst = common::reciprocity_identity(1000, 5);
    assert!(worst < 1e-12, "max relative error {worst:e}");
}

#[test]
fn zero_uplink_gain_is_not_invertible() {
    let mut chains = RfChainSet::identity(4);
    chains.r_ul[2] = Complex64::new(0.0, 0.0);
    let h = FrequencyResponse::new(vec![Complex64::new(1.0, 0.0); 4]);
    assert!(matches!(oracle_reciprocity(&h, &chains), Err(Error::Invertibility(_))));
}
