use crate::env::Observation;
use crate::text::encoder::EncoderMode;

/// Segment separator understood by [`crate::text::tokenize`].
pub const SEP_MARKER: &str = " [SEP] ";

/// Observation text fed to the observation encoder.
///
/// Base and hash modes use `feedback [SEP] look [SEP] inventory`; min-ob
/// keeps only the location phrase.
pub fn compose_observation_text(obs: &Observation, mode: EncoderMode) -> String {
    match mode {
        EncoderMode::MinOb => obs.location.clone(),
        EncoderMode::Base | EncoderMode::Hash => full_text(obs),
    }
}

pub(crate) fn full_text(obs: &Observation) -> String {
    format!(
        "{}{SEP_MARKER}{}{SEP_MARKER}{}",
        obs.feedback, obs.look, obs.inventory
    )
}
