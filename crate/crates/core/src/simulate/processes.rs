use rand::Rng;
use rand_distr::Exp1;

use crate::cox::StepCovariates;
use crate::ctmc::{pieces, CtmcParams, SegmentScheme, State};
use crate::error::Result;

use super::config::CoxTruth;

/// States at the observation distances `spots` of a chain started punctual
/// at `spots[0]`. Within each constant piece waiting times are exact
/// exponentials; a fresh draw is taken whenever the intensity changes.
pub fn simulate_states<R: Rng>(
    rng: &mut R,
    params: &CtmcParams,
    scheme: &SegmentScheme,
    covariates: &StepCovariates,
    spots: &[f64],
) -> Result<Vec<State>> {
    let mut state = State::Punctual;
    let mut out = Vec::with_capacity(spots.len());
    out.push(state);
    for w in spots.windows(2) {
        for piece in pieces(covariates, w[0], w[1], scheme)? {
            let (a, b) = params.rates(&covariates.values[piece.covariate_piece], piece.segment);
            let mut left = piece.length;
            loop {
                let rate = match state {
                    State::Punctual => a,
                    State::Delayed => b,
                };
                if !(rate > 0.0) {
                    break;
                }
                let wait = rng.sample::<f64, _>(Exp1) / rate;
                if wait >= left {
                    break;
                }
                left -= wait;
                state = match state {
                    State::Punctual => State::Delayed,
                    State::Delayed => State::Punctual,
                };
            }
        }
        out.push(state);
    }
    Ok(out)
}

/// Recurrent event distances on `[start, end]` of the covariate path: the
/// `j`-th event is drawn by inverting the stratum-`j` cumulative hazard
/// from the previous event onwards.
pub fn simulate_recurrent_events<R: Rng>(rng: &mut R, truth: &CoxTruth, covariates: &StepCovariates) -> Vec<f64> {
    let beta = truth.beta();
    let mut cuts: Vec<f64> = covariates
        .ends
        .iter()
        .copied()
        .chain(
            truth
                .edges()
                .into_iter()
                .filter(|&e| e > covariates.start && e < covariates.end()),
        )
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut events = Vec::new();
    let mut target: f64 = rng.sample(Exp1);
    let mut lo = covariates.start;
    for hi in cuts {
        let x = covariates.at(0.5 * (lo + hi)).expect("inside path");
        let mult: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>().exp();
        let mut at = lo;
        loop {
            let rate = truth.baseline(events.len() + 1, 0.5 * (lo + hi)) * mult;
            if !(rate > 0.0) {
                break;
            }
            let reach = at + target / rate;
            if reach >= hi {
                target -= rate * (hi - at);
                break;
            }
            events.push(reach);
            at = reach;
            target = rng.sample(Exp1);
        }
        lo = hi;
    }
    events
}
