//! Round messages and their wire encoding.
//!
//! Wire format: `[u32 length (big-endian)][UTF-8 JSON object]`. The object has
//! the fields `kind`, `round`, `participant_id`, `payload` (row-major nested
//! arrays or `null`) and `objective_part` (number or `null`). `Register`
//! messages additionally carry `label_owner`. Every float is written with 17
//! significant digits, which round-trips any `f64` exactly.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME_LEN: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Register,
    ZkUpload,
    ZBroadcast,
    Converged,
    Abort,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Register => "Register",
            MessageKind::ZkUpload => "ZkUpload",
            MessageKind::ZBroadcast => "ZBroadcast",
            MessageKind::Converged => "Converged",
            MessageKind::Abort => "Abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub kind: MessageKind,
    pub round: u64,
    pub participant_id: u64,
    #[serde(with = "matrix_rows")]
    pub payload: Option<Matrix>,
    pub objective_part: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_owner: Option<bool>,
}

impl RoundMessage {
    pub fn register(participant_id: usize, label_owner: bool) -> Self {
        RoundMessage {
            kind: MessageKind::Register,
            round: 0,
            participant_id: participant_id as u64,
            payload: None,
            objective_part: None,
            label_owner: Some(label_owner),
        }
    }

    pub fn upload(round: usize, participant_id: usize, z_k: Matrix, objective_part: f64) -> Self {
        RoundMessage {
            kind: MessageKind::ZkUpload,
            round: round as u64,
            participant_id: participant_id as u64,
            payload: Some(z_k),
            objective_part: Some(objective_part),
            label_owner: None,
        }
    }

    /// Consensus matrix sent to one participant; `Converged` on the last round.
    pub fn consensus(kind: MessageKind, round: usize, participant_id: usize, z: Matrix) -> Self {
        RoundMessage {
            kind,
            round: round as u64,
            participant_id: participant_id as u64,
            payload: Some(z),
            objective_part: None,
            label_owner: None,
        }
    }

    pub fn abort(round: usize, participant_id: usize) -> Self {
        RoundMessage {
            kind: MessageKind::Abort,
            round: round as u64,
            participant_id: participant_id as u64,
            payload: None,
            objective_part: None,
            label_owner: None,
        }
    }
}

mod matrix_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::numerics::{self, Matrix};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(numerics::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| numerics::from_rows(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// JSON formatter writing floats with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }
}

/// `value` with 17 significant digits in scientific notation.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// JSON body of a message, without the length prefix.
pub fn encode_json(msg: &RoundMessage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    msg.serialize(&mut ser)?;
    Ok(out)
}

/// Complete frame: 4-byte big-endian length, then the JSON body.
pub fn encode_frame(msg: &RoundMessage) -> Result<Vec<u8>> {
    let body = encode_json(msg)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&l| l as usize <= MAX_FRAME_LEN)
        .ok_or_else(|| Error::InvalidArgument(format!("frame too large: {} bytes", body.len())))?;
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

pub fn decode_json(body: &[u8]) -> Result<RoundMessage> {
    Ok(serde_json::from_slice(body)?)
}

/// Decodes one complete frame; trailing bytes are an error.
pub fn decode_frame(frame: &[u8]) -> Result<RoundMessage> {
    if frame.len() < 4 {
        return Err(Error::Abort("truncated frame header".into()));
    }
    let len = u32::from_be_bytes([frame[0], frame[1], frame[2], frame[3]]) as usize;
    if frame.len() != 4 + len {
        return Err(Error::Abort(format!(
            "frame declares {len} bytes but carries {}",
            frame.len() - 4
        )));
    }
    decode_json(&frame[4..])
}

/// Writes one frame and returns its size in bytes.
pub fn write_frame<W: Write>(writer: &mut W, msg: &RoundMessage) -> Result<usize> {
    let frame = encode_frame(msg)?;
    writer.write_all(&frame)?;
    writer.flush()?;
    Ok(frame.len())
}

/// Reads one frame, returning the message and the frame size in bytes.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<(RoundMessage, usize)> {
    let mut len_buf = [0u8; 4];
    reader.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame too large: {len} bytes"),
        ));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    let msg =
        serde_json::from_slice(&body).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    Ok((msg, 4 + len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{from_rows, standard_normal, Seed};
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn register_layout() {
        let json =
            String::from_utf8(encode_json(&RoundMessage::register(2, true)).unwrap()).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"Register","round":0,"participant_id":2,"payload":null,"objective_part":null,"label_owner":true}"#
        );
    }

    #[test]
    fn upload_layout() {
        let z = from_rows(&[vec![1.0, -0.5], vec![0.25, 3.0]]).unwrap();
        let json =
            String::from_utf8(encode_json(&RoundMessage::upload(3, 1, z, 2.5)).unwrap()).unwrap();
        assert_eq!(
            json,
            concat!(
                r#"{"kind":"ZkUpload","round":3,"participant_id":1,"#,
                r#""payload":[[1.0000000000000000e0,-5.0000000000000000e-1],"#,
                r#"[2.5000000000000000e-1,3.0000000000000000e0]],"#,
                r#""objective_part":2.5000000000000000e0}"#
            )
        );
    }

    #[test]
    fn frame_header_is_big_endian_length() {
        let msg = RoundMessage::abort(4, 0);
        let frame = encode_frame(&msg).unwrap();
        let body = encode_json(&msg).unwrap();
        assert_eq!(&frame[..4], &(body.len() as u32).to_be_bytes());
        assert_eq!(&frame[4..], &body[..]);
        assert_eq!(decode_frame(&frame).unwrap(), msg);
    }

    #[test]
    fn stream_round_trip_reports_sizes() {
        let z = standard_normal(6, 3, &mut Seed(1).rng());
        let msgs = [
            RoundMessage::register(0, false),
            RoundMessage::upload(1, 0, z.clone(), 0.1),
            RoundMessage::consensus(MessageKind::Converged, 1, 0, z),
        ];
        let mut buf = Vec::new();
        let sizes: Vec<usize> = msgs
            .iter()
            .map(|m| write_frame(&mut buf, m).unwrap())
            .collect();
        let mut cursor = Cursor::new(buf);
        for (m, size) in msgs.iter().zip(sizes) {
            let (got, n) = read_frame(&mut cursor).unwrap();
            assert_eq!(&got, m);
            assert_eq!(n, size);
        }
    }

    #[test]
    fn rejects_oversized_and_truncated_frames() {
        let mut bad = Vec::new();
        bad.extend_from_slice(&u32::MAX.to_be_bytes());
        assert!(read_frame(&mut Cursor::new(bad)).is_err());
        assert!(decode_frame(&[0, 0]).is_err());
        let mut frame = encode_frame(&RoundMessage::abort(0, 0)).unwrap();
        frame.push(b' ');
        assert!(decode_frame(&frame).is_err());
    }

    #[test]
    fn rejects_ragged_payload() {
        let body = br#"{"kind":"ZkUpload","round":1,"participant_id":0,"payload":[[1.0],[1.0,2.0]],"objective_part":null}"#;
        assert!(decode_json(body).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let m = Matrix::from_element(1, 1, v);
            let msg = RoundMessage::upload(1, 0, m, v);
            let back = decode_frame(&encode_frame(&msg).unwrap()).unwrap();
            prop_assert_eq!(back.payload.unwrap()[(0, 0)].to_bits(), bits);
            prop_assert_eq!(back.objective_part.unwrap().to_bits(), bits);
        }
    }
}
