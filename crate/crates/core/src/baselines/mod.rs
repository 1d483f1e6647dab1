//! Reference schemes: Gray-mapped QPSK, a sphere-packing codebook, and
//! analog repetition with pilot equalization.

mod agrell;
mod analog;
mod pilot;
mod qpsk;

pub use agrell::{agrell_generate_fallback, agrell_load, e8_first_shell, e8_second_shell, write_codebook, Codebook};
pub use analog::{analog_rx_awgn, analog_rx_rbf, analog_tx_awgn, analog_tx_rbf, AnalogAwgn, AnalogRbf, SourceMoments};
pub use pilot::{pilot_equalize, with_pilot, Piloted, PILOT};
pub use qpsk::{qpsk_bler_closed_form, Qpsk};
