//! Flat binary parameter snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! u32            number of layer sizes (L + 1)
//! u32 * (L + 1)  layer sizes
//! u8             hidden activation   (0 relu, 1 tanh, 2 leaky_relu)
//! u8             output activation   (0 identity, 1 tanh, 2 clip)
//! f64, f64       clip lower / upper bound, present only for clip
//! per layer:     f64 weights, row-major (out, in), then f64 biases
//! ```

use std::io::{Read, Write};

use super::mlp::{Activation, Mlp, OutputActivation};
use crate::error::{Error, Result};

pub fn write_snapshot<W: Write>(net: &Mlp, mut out: W) -> Result<()> {
    let sizes = net.layer_sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    out.write_all(&[net.hidden_activation().code()])?;
    match net.output_activation() {
        OutputActivation::Identity => out.write_all(&[0])?,
        OutputActivation::Tanh => out.write_all(&[1])?,
        OutputActivation::Clip { lo, hi } => {
            out.write_all(&[2])?;
            out.write_all(&lo.to_le_bytes())?;
            out.write_all(&hi.to_le_bytes())?;
        }
    }
    for p in net.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<Mlp> {
    let count = read_u32(&mut input)? as usize;
    if !(2..=64).contains(&count) {
        return Err(Error::Format(format!("implausible layer count {count}")));
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        sizes.push(read_u32(&mut input)? as usize);
    }
    let hidden_code = read_u8(&mut input)?;
    let hidden = Activation::from_code(hidden_code)
        .ok_or_else(|| Error::Format(format!("unknown hidden activation code {hidden_code}")))?;
    let output = match read_u8(&mut input)? {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Tanh,
        2 => {
            let lo = read_f64(&mut input)?;
            let hi = read_f64(&mut input)?;
            OutputActivation::Clip { lo, hi }
        }
        c => return Err(Error::Format(format!("unknown output activation code {c}"))),
    };
    let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        params.push(read_f64(&mut input)?);
    }
    Mlp::from_params(&sizes, hidden, output, params)
}

pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let mut buf = Vec::new();
    write_snapshot(net, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout_is_fixed() {
        let net = Mlp::from_params(&[1, 1], Activation::Tanh, OutputActivation::Identity, vec![2.0, 1.0]).unwrap();
        let bytes = to_bytes(&net);
        let mut expected = Vec::new();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&[1, 0]);
        expected.extend_from_slice(&2.0f64.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn clip_network_survives_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(
            &[5, 16, 16, 1],
            Activation::Tanh,
            OutputActivation::Clip { lo: -10.0, hi: 10.0 },
            &mut rng,
        )
        .unwrap();
        let back = read_snapshot(to_bytes(&net).as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn truncated_input_errors() {
        let net = Mlp::zeros(&[2, 3], Activation::Relu, OutputActivation::Identity).unwrap();
        let bytes = to_bytes(&net);
        assert!(read_snapshot(&bytes[..bytes.len() - 3]).is_err());
    }
}
