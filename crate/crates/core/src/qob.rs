//! QOB outcome-stream files, text and binary.
//!
//! Text: `# key=value` header lines, then one line per cycle of exactly
//! `n_qubits` characters from `{0,1}`, qubit 0 first.
//!
//! Binary (little-endian):
//!
//! ```text
//! "QOB1" | u32 n_qubits | u64 n_cycles
//! f64 t_cycle_us, t_x_ns, t_wait_us, t_ro_us, t_idle_us, device_area_cm2
//! u32 m_extra_pulses | u16 label_len | label (UTF-8)
//! n_cycles rows of ceil(n_qubits/8) bytes, qubit 0 in the LSB of the first byte
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::types::{AcquisitionConfig, BitMatrix, OutcomeSeries};
use crate::Error;

pub const MAGIC: &[u8; 4] = b"QOB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QobFormat {
    Text,
    Binary,
}

impl std::str::FromStr for QobFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "text" => Ok(Self::Text),
            "binary" => Ok(Self::Binary),
            other => Err(Error::InvalidArgument(format!("unknown QOB format `{other}`"))),
        }
    }
}

/// Size of the binary header for a given device label.
pub fn binary_header_len(label: &str) -> usize {
    4 + 4 + 8 + 6 * 8 + 4 + 2 + label.len()
}

const REQUIRED_KEYS: [&str; 9] = [
    "n_qubits",
    "t_cycle_us",
    "t_x_ns",
    "t_wait_us",
    "t_ro_us",
    "t_idle_us",
    "m_extra_pulses",
    "device_label",
    "device_area_cm2",
];

pub fn write_outcomes<W: Write>(series: &OutcomeSeries, format: QobFormat, out: W) -> Result<(), Error> {
    match format {
        QobFormat::Text => write_text(series, out),
        QobFormat::Binary => write_binary(series, out),
    }
}

pub fn read_outcomes<R: Read>(source: R, format: QobFormat) -> Result<OutcomeSeries, Error> {
    match format {
        QobFormat::Text => read_text(source),
        QobFormat::Binary => read_binary(source),
    }
}

/// Reads either format, sniffing the magic bytes.
pub fn read_outcomes_auto<R: Read>(mut source: R) -> Result<OutcomeSeries, Error> {
    let mut head = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let k = source.read(&mut head[got..])?;
        if k == 0 {
            break;
        }
        got += k;
    }
    let chained = (&head[..got]).chain(source);
    if got == 4 && &head == MAGIC {
        read_binary(chained)
    } else {
        read_text(chained)
    }
}

fn write_text<W: Write>(s: &OutcomeSeries, mut out: W) -> Result<(), Error> {
    let c = &s.config;
    if c.device_label.contains('\n') {
        return Err(Error::Format("device label must not contain a newline".into()));
    }
    writeln!(out, "# n_qubits={}", c.n_qubits)?;
    writeln!(out, "# t_cycle_us={}", c.t_cycle_us)?;
    writeln!(out, "# t_x_ns={}", c.t_x_ns)?;
    writeln!(out, "# t_wait_us={}", c.t_wait_us)?;
    writeln!(out, "# t_ro_us={}", c.t_ro_us)?;
    writeln!(out, "# t_idle_us={}", c.t_idle_us)?;
    writeln!(out, "# m_extra_pulses={}", c.m_extra_pulses)?;
    writeln!(out, "# device_label={}", c.device_label)?;
    writeln!(out, "# device_area_cm2={}", c.device_area_cm2)?;
    if let Some(seed) = s.seed {
        writeln!(out, "# seed={seed}")?;
    }
    if let Some(t) = &s.start_time {
        writeln!(out, "# start_time={t}")?;
    }
    let nq = c.n_qubits;
    let mut line = vec![b'0'; nq + 1];
    line[nq] = b'\n';
    for k in 0..s.n_cycles() {
        for (q, ch) in line[..nq].iter_mut().enumerate() {
            *ch = if s.outcomes.get(k, q) { b'1' } else { b'0' };
        }
        out.write_all(&line)?;
    }
    out.flush()?;
    Ok(())
}

fn write_binary<W: Write>(s: &OutcomeSeries, mut out: W) -> Result<(), Error> {
    let c = &s.config;
    let label = c.device_label.as_bytes();
    let label_len: u16 = label
        .len()
        .try_into()
        .map_err(|_| Error::Format("device label longer than 65535 bytes".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(c.n_qubits as u32).to_le_bytes())?;
    out.write_all(&(s.n_cycles() as u64).to_le_bytes())?;
    for v in [c.t_cycle_us, c.t_x_ns, c.t_wait_us, c.t_ro_us, c.t_idle_us, c.device_area_cm2] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&c.m_extra_pulses.to_le_bytes())?;
    out.write_all(&label_len.to_le_bytes())?;
    out.write_all(label)?;
    out.write_all(s.outcomes.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn parse_header_value<T: std::str::FromStr>(h: &HashMap<String, String>, key: &str) -> Result<T, Error> {
    let raw = h
        .get(key)
        .ok_or_else(|| Error::Format(format!("header missing required key `{key}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Format(format!("header key `{key}` has invalid value `{raw}`")))
}

fn read_text<R: Read>(source: R) -> Result<OutcomeSeries, Error> {
    let reader = BufReader::new(source);
    let mut header: HashMap<String, String> = HashMap::new();
    let mut rows: Option<BitMatrix> = None;
    let mut n_qubits = 0usize;
    for (lineno, line) in reader.split(b'\n').enumerate() {
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if rows.is_none() {
            if let Some(rest) = line.strip_prefix(b"#") {
                let text = std::str::from_utf8(rest)
                    .map_err(|_| Error::Format(format!("line {}: header is not UTF-8", lineno + 1)))?;
                let (k, v) = text
                    .trim_start()
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("line {}: header line without `=`", lineno + 1)))?;
                header.insert(k.trim().to_string(), v.to_string());
                continue;
            }
            for key in REQUIRED_KEYS {
                if !header.contains_key(key) {
                    return Err(Error::Format(format!("header missing required key `{key}`")));
                }
            }
            n_qubits = parse_header_value(&header, "n_qubits")?;
            rows = Some(BitMatrix::with_capacity(0, n_qubits));
        }
        if line.is_empty() {
            // tolerate a trailing blank line only
            continue;
        }
        let m = rows.as_mut().unwrap();
        if line.len() != n_qubits {
            return Err(Error::Format(format!(
                "line {}: row width {} != n_qubits {n_qubits}",
                lineno + 1,
                line.len()
            )));
        }
        let mut packed = vec![0u8; n_qubits.div_ceil(8)];
        for (q, &ch) in line.iter().enumerate() {
            match ch {
                b'0' => {}
                b'1' => packed[q / 8] |= 1 << (q % 8),
                _ => {
                    return Err(Error::Format(format!(
                        "line {}: non-bit character `{}`",
                        lineno + 1,
                        ch as char
                    )))
                }
            }
        }
        m.push_packed_row(&packed);
    }
    if rows.is_none() {
        for key in REQUIRED_KEYS {
            if !header.contains_key(key) {
                return Err(Error::Format(format!("header missing required key `{key}`")));
            }
        }
        n_qubits = parse_header_value(&header, "n_qubits")?;
        rows = Some(BitMatrix::zeros(0, n_qubits));
    }
    let config = AcquisitionConfig::new(
        n_qubits,
        parse_header_value(&header, "t_x_ns")?,
        parse_header_value(&header, "t_wait_us")?,
        parse_header_value(&header, "t_ro_us")?,
        parse_header_value(&header, "t_idle_us")?,
        parse_header_value(&header, "t_cycle_us")?,
        parse_header_value(&header, "m_extra_pulses")?,
        header["device_label"].clone(),
        parse_header_value(&header, "device_area_cm2")?,
    )?;
    let mut series = OutcomeSeries::new(config, rows.unwrap())?;
    if header.contains_key("seed") {
        series.seed = Some(parse_header_value(&header, "seed")?);
    }
    series.start_time = header.get("start_time").cloned();
    Ok(series)
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), Error> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated payload while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

fn read_binary<R: Read>(source: R) -> Result<OutcomeSeries, Error> {
    let mut r = BufReader::new(source);
    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("binary magic mismatch: {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b2 = [0u8; 2];
    read_exact_or(&mut r, &mut b4, "n_qubits")?;
    let n_qubits = u32::from_le_bytes(b4) as usize;
    read_exact_or(&mut r, &mut b8, "n_cycles")?;
    let n_cycles = u64::from_le_bytes(b8) as usize;
    let mut f = [0f64; 6];
    for v in f.iter_mut() {
        read_exact_or(&mut r, &mut b8, "timing header")?;
        *v = f64::from_le_bytes(b8);
    }
    let [t_cycle_us, t_x_ns, t_wait_us, t_ro_us, t_idle_us, area] = f;
    read_exact_or(&mut r, &mut b4, "m_extra_pulses")?;
    let m_extra = u32::from_le_bytes(b4);
    read_exact_or(&mut r, &mut b2, "label length")?;
    let mut label = vec![0u8; u16::from_le_bytes(b2) as usize];
    read_exact_or(&mut r, &mut label, "label")?;
    let label = String::from_utf8(label).map_err(|_| Error::Format("device label is not UTF-8".into()))?;
    let config = AcquisitionConfig::new(n_qubits, t_x_ns, t_wait_us, t_ro_us, t_idle_us, t_cycle_us, m_extra, label, area)?;
    let row_bytes = n_qubits.div_ceil(8);
    let payload_len = n_cycles
        .checked_mul(row_bytes)
        .ok_or_else(|| Error::Format("n_cycles overflows payload size".into()))?;
    let mut data = Vec::new();
    (&mut r).take(payload_len as u64).read_to_end(&mut data)?;
    if data.len() != payload_len {
        return Err(Error::Format(format!(
            "truncated payload: {} of {payload_len} bytes",
            data.len()
        )));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    OutcomeSeries::new(config, BitMatrix::from_packed(n_cycles, n_qubits, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nq: usize) -> AcquisitionConfig {
        AcquisitionConfig::with_cycle(nq, 20.0, 2.0, 2.0, 30.0, 0, "S5-like", 0.64).unwrap()
    }

    fn text_of(rows: &[&str], nq: usize) -> String {
        let mut s = String::new();
        let c = cfg(nq);
        s += &format!(
            "# n_qubits={nq}\n# t_cycle_us={}\n# t_x_ns=20\n# t_wait_us=2\n# t_ro_us=2\n# t_idle_us={}\n# m_extra_pulses=0\n# device_label=dev\n# device_area_cm2=0.64\n",
            c.t_cycle_us, c.t_idle_us
        );
        for r in rows {
            s += r;
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_two_by_two() {
        let s = read_outcomes(text_of(&["10", "01"], 2).as_bytes(), QobFormat::Text).unwrap();
        assert_eq!(s.n_cycles(), 2);
        assert!(s.outcomes.get(0, 0) && !s.outcomes.get(0, 1));
        assert!(!s.outcomes.get(1, 0) && s.outcomes.get(1, 1));
        let mut out = Vec::new();
        write_outcomes(&s, QobFormat::Text, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.ends_with("10\n01\n"));
    }

    #[test]
    fn empty_payload() {
        let s = read_outcomes(text_of(&[], 3).as_bytes(), QobFormat::Text).unwrap();
        assert_eq!(s.n_cycles(), 0);
        assert_eq!(s.n_qubits(), 3);
    }

    #[test]
    fn text_errors() {
        let bad_width = text_of(&["101"], 2);
        assert!(read_outcomes(bad_width.as_bytes(), QobFormat::Text)
            .unwrap_err()
            .to_string()
            .contains("row width"));
        let bad_char = text_of(&["1x"], 2);
        assert!(read_outcomes(bad_char.as_bytes(), QobFormat::Text)
            .unwrap_err()
            .to_string()
            .contains("non-bit"));
        let missing = text_of(&["10"], 2).replace("# device_label=dev\n", "");
        assert!(read_outcomes(missing.as_bytes(), QobFormat::Text)
            .unwrap_err()
            .to_string()
            .contains("device_label"));
    }

    #[test]
    fn binary_errors() {
        let s = read_outcomes(text_of(&["10", "01", "11"], 2).as_bytes(), QobFormat::Text).unwrap();
        let mut buf = Vec::new();
        write_outcomes(&s, QobFormat::Binary, &mut buf).unwrap();
        assert_eq!(buf.len(), binary_header_len("dev") + 3);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_outcomes(&bad[..], QobFormat::Binary)
            .unwrap_err()
            .to_string()
            .contains("magic"));
        let truncated = &buf[..buf.len() - 1];
        assert!(read_outcomes(truncated, QobFormat::Binary)
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        assert_eq!(read_outcomes_auto(&buf[..]).unwrap(), s);
    }

    #[test]
    fn metadata_survives_text() {
        let mut s = read_outcomes(text_of(&["1"], 1).as_bytes(), QobFormat::Text).unwrap();
        s.seed = Some(99);
        s.start_time = Some("2024-06-24T10:00:00Z".into());
        let mut buf = Vec::new();
        write_outcomes(&s, QobFormat::Text, &mut buf).unwrap();
        assert_eq!(read_outcomes(&buf[..], QobFormat::Text).unwrap(), s);
    }
}
