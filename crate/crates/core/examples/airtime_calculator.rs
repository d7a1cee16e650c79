//! Time on air and transmit energy of a 10-byte packet at every spreading factor.

use leolora::error::Result;
use leolora::radio::{self, RadioConfig};

pub fn run_example() -> Result<Vec<(u8, f64, f64)>> {
    (7..=12)
        .map(|sf| {
            let r = RadioConfig::new(sf, 125_000, 10, 0.4);
            Ok((sf, radio::time_on_air(&r)?, radio::tx_energy(&r)?))
        })
        .collect()
}

fn main() -> Result<()> {
    println!("SF  time on air (s)  energy (J)  8 attempts (s)");
    for (sf, toa, e) in run_example()? {
        println!("{sf:>2}  {toa:>15.6}  {e:>10.6}  {:>14.3}", 8.0 * toa);
    }
    Ok(())
}
