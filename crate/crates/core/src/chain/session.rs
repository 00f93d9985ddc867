//! Session CSV files: one frame per row.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::frame::SampleFrame;
use super::models::AfeConfig;

pub const SESSION_HEADER: [&str; 7] = [
    "t_s",
    "optode_id",
    "adc_code_on",
    "adc_code_ambient",
    "v_on",
    "v_ambient",
    "v_cancelled",
];

/// Volts to six significant digits.
fn volts(v: f64) -> String {
    format!("{v:.5e}")
}

/// Writes frames in session format.
pub fn write_session<W: Write>(out: W, frames: &[SampleFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::SimulationFault(format!("writing session: {e}"));
    w.write_record(SESSION_HEADER).map_err(err)?;
    for f in frames {
        w.write_record([
            format!("{}", f.t_s),
            f.optode_id.to_string(),
            f.adc_code_on.to_string(),
            f.adc_code_ambient.to_string(),
            volts(f.v_led_on),
            volts(f.v_ambient),
            volts(f.v_cancelled()),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::SimulationFault(format!("writing session: {e}")))
}

pub fn parse_session(path: &Path, afe: &AfeConfig) -> Result<Vec<SampleFrame>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_session_str(&text, &path.display().to_string(), afe)
}

/// Parses session text; `origin` names the source in error messages.
/// Voltages are rebuilt from the codes and the printed columns must agree
/// with them to printing precision.
pub fn parse_session_str(text: &str, origin: &str, afe: &AfeConfig) -> Result<Vec<SampleFrame>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(SESSION_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            format!("header must be '{}'", SESSION_HEADER.join(",")),
        ));
    }
    let mut frames = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != SESSION_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected 7 fields, found {}", rec.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                parse_err(
                    line,
                    format!("{} '{}' is not a number", SESSION_HEADER[i], &rec[i]),
                )
            })
        };
        let int = |i: usize| -> Result<u32> {
            rec[i].parse::<u32>().map_err(|_| {
                parse_err(
                    line,
                    format!("{} '{}' is not a code", SESSION_HEADER[i], &rec[i]),
                )
            })
        };
        let t = num(0)?;
        if !t.is_finite() {
            return Err(parse_err(line, "timestamp must be finite".into()));
        }
        let optode: u8 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("optode_id '{}' is not an integer", &rec[1])))?;
        let frame =
            SampleFrame::from_codes(t, optode, int(2)?, int(3)?, afe).map_err(|e| match e {
                Error::Schema(m) => Error::Schema(format!("{origin}:{line}: {m}")),
                other => other,
            })?;
        for (i, expect) in [
            (4, frame.v_led_on),
            (5, frame.v_ambient),
            (6, frame.v_cancelled()),
        ] {
            let got = num(i)?;
            if volts(got) != volts(expect) {
                return Err(parse_err(
                    line,
                    format!(
                        "{} {} disagrees with its ADC code ({})",
                        SESSION_HEADER[i],
                        &rec[i],
                        volts(expect)
                    ),
                ));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(afe: &AfeConfig) -> Vec<SampleFrame> {
        vec![
            SampleFrame::from_codes(0.0, 1, 84_305, 16_609, afe).unwrap(),
            SampleFrame::from_codes(1.0, 8, 10, 20, afe).unwrap(),
        ]
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let afe = AfeConfig::default();
        let f = frames(&afe);
        let mut a = Vec::new();
        write_session(&mut a, &f).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with(
            "t_s,optode_id,adc_code_on,adc_code_ambient,v_on,v_ambient,v_cancelled\n"
        ));
        let back = parse_session_str(&text, "mem", &afe).unwrap();
        assert_eq!(back, f);
        let mut b = Vec::new();
        write_session(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let afe = AfeConfig::default();
        let text = "t_s,optode_id,adc_code_on,adc_code_ambient,v_on,v_ambient,v_cancelled\n0,1,10,5,2.38420e-6,1.19210e-6,1.19210e-6\n1,1,x,5,0,0,0\n";
        match parse_session_str(text, "s.csv", &afe) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_id = "t_s,optode_id,adc_code_on,adc_code_ambient,v_on,v_ambient,v_cancelled\n0,9,10,5,2.38420e-6,1.19210e-6,1.19210e-6\n";
        assert!(matches!(
            parse_session_str(bad_id, "s.csv", &afe),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_session_str("a,b\n", "s.csv", &afe),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
