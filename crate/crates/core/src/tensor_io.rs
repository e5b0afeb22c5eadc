//! File formats: the `.ucmt` binary tensor container and the text track table.
//!
//! `.ucmt` layout, all integers little-endian:
//!
//! ```text
//! "UCMT" | version u8 | dtype u8 | ndim u8 | dims: ndim x u32 | payload
//! ```
//!
//! dtype codes are `0 = u8`, `1 = u16`, `2 = f32`; the payload is row-major.
//! Track tables hold one `"<label> <begin> <end> <parent>"` line per track.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ForegroundMask, LabelImage, Raster, Shape};

pub const MAGIC: &[u8; 4] = b"UCMT";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    U8,
    U16,
    F32,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::U8 => 0,
            DType::U16 => 1,
            DType::F32 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::U8),
            1 => Some(DType::U16),
            2 => Some(DType::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::U8(_) => DType::U8,
            TensorData::U16(_) => DType::U16,
            TensorData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
            TensorData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_f32(&self) -> Vec<f32> {
        match self {
            TensorData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            TensorData::U16(v) => v.iter().map(|&x| x as f32).collect(),
            TensorData::F32(v) => v.clone(),
        }
    }
}

/// An n-dimensional array with a fixed element type.
///
/// Time series use a leading `t` axis followed by the spatial axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::Shape(format!("unsupported rank {}", dims.len())));
        }
        if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
            return Err(Error::Shape(format!("axis lengths out of range: {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(HEADER_LEN + 4 * self.dims.len() + self.data.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype().code());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, msg: String| Error::Decode { offset, msg };
        if bytes.len() < 4 {
            return Err(fail(bytes.len(), "file shorter than magic".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(fail(0, format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
        }
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), "truncated header".into()));
        }
        if bytes[4] != VERSION {
            return Err(fail(4, format!("unsupported version {}", bytes[4])));
        }
        let dtype = DType::from_code(bytes[5]).ok_or_else(|| fail(5, format!("unknown dtype code {}", bytes[5])))?;
        let ndim = bytes[6] as usize;
        if ndim == 0 {
            return Err(fail(6, "rank zero".into()));
        }
        let dims_end = HEADER_LEN + 4 * ndim;
        if bytes.len() < dims_end {
            return Err(fail(bytes.len(), format!("truncated dims, need {dims_end} bytes")));
        }
        let mut dims = Vec::with_capacity(ndim);
        for i in 0..ndim {
            let at = HEADER_LEN + 4 * i;
            let d = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            if d == 0 {
                return Err(fail(at, "zero-length axis".into()));
            }
            dims.push(d);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| fail(HEADER_LEN, "element count overflows".into()))?;
        let payload = &bytes[dims_end..];
        let need = count
            .checked_mul(dtype.size())
            .ok_or_else(|| fail(HEADER_LEN, "payload size overflows".into()))?;
        if payload.len() < need {
            return Err(fail(
                bytes.len(),
                format!("truncated payload: need {need} bytes, have {}", payload.len()),
            ));
        }
        if payload.len() > need {
            return Err(fail(dims_end + need, "trailing bytes after payload".into()));
        }
        let data = match dtype {
            DType::U8 => TensorData::U8(payload.to_vec()),
            DType::U16 => TensorData::U16(
                payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        };
        Ok(Self { dims, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    /// Split a `(t, spatial...)` tensor into frames of `f32` values.
    pub fn to_f32_frames(&self) -> Result<Vec<Raster<f32>>> {
        let (shape, t) = self.frame_shape()?;
        let all = self.data.to_f32();
        split(all, shape, t)
    }

    /// Foreground frames: any non-zero value is foreground.
    pub fn to_mask_frames(&self) -> Result<Vec<ForegroundMask>> {
        Ok(self
            .to_f32_frames()?
            .into_iter()
            .map(|f| f.map(|&v| v != 0.0))
            .collect())
    }

    /// Label frames; only integer dtypes are accepted.
    pub fn to_label_frames(&self) -> Result<Vec<LabelImage>> {
        let (shape, t) = self.frame_shape()?;
        let all: Vec<u32> = match &self.data {
            TensorData::U8(v) => v.iter().map(|&x| x as u32).collect(),
            TensorData::U16(v) => v.iter().map(|&x| x as u32).collect(),
            TensorData::F32(_) => {
                return Err(Error::Shape("label tensors must be u8 or u16".into()));
            }
        };
        split(all, shape, t)
    }

    pub fn from_f32_frames(frames: &[Raster<f32>]) -> Result<Self> {
        let (dims, data) = stack(frames, |&v| v)?;
        Tensor::new(dims, TensorData::F32(data))
    }

    pub fn from_mask_frames(frames: &[ForegroundMask]) -> Result<Self> {
        let (dims, data) = stack(frames, |&v| v as u8)?;
        Tensor::new(dims, TensorData::U8(data))
    }

    pub fn from_label_frames(frames: &[LabelImage]) -> Result<Self> {
        if let Some(&big) = frames.iter().flat_map(|f| f.data()).find(|&&l| l > u16::MAX as u32) {
            return Err(Error::InvalidParam(format!(
                "label {big} does not fit the u16 label encoding"
            )));
        }
        let (dims, data) = stack(frames, |&v| v as u16)?;
        Tensor::new(dims, TensorData::U16(data))
    }

    fn frame_shape(&self) -> Result<(Shape, usize)> {
        if self.dims.len() < 2 || self.dims.len() > 4 {
            return Err(Error::Shape(format!(
                "time series need (t, [z], y, x) or (t, x) axes, got {:?}",
                self.dims
            )));
        }
        Ok((Shape::new(&self.dims[1..])?, self.dims[0]))
    }
}

fn split<T: Clone>(all: Vec<T>, shape: Shape, t: usize) -> Result<Vec<Raster<T>>> {
    let n = shape.len();
    (0..t)
        .map(|i| Raster::from_vec(shape.clone(), all[i * n..(i + 1) * n].to_vec()))
        .collect()
}

fn stack<T, U>(frames: &[Raster<T>], f: impl Fn(&T) -> U) -> Result<(Vec<usize>, Vec<U>)> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Shape("cannot stack zero frames".into()))?;
    let shape = first.shape();
    let mut data = Vec::with_capacity(shape.len() * frames.len());
    for fr in frames {
        crate::grid::ensure_same_shape(shape, fr.shape(), "frame stack")?;
        data.extend(fr.data().iter().map(&f));
    }
    let mut dims = vec![frames.len()];
    dims.extend_from_slice(shape.dims());
    Ok((dims, data))
}

/// One lineage record: a track lives on frames `begin..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackRecord {
    pub label: u32,
    pub begin: usize,
    pub end: usize,
    /// `0` when the track has no parent.
    pub parent: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrackTable {
    pub records: Vec<TrackRecord>,
}

impl TrackTable {
    pub fn new(records: Vec<TrackRecord>) -> Result<Self> {
        let t = Self { records };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, label: u32) -> Option<&TrackRecord> {
        self.records.iter().find(|r| r.label == label)
    }

    /// Checks the table invariants; errors carry the 1-based record index as line.
    pub fn validate(&self) -> Result<()> {
        let mut by_label: HashMap<u32, &TrackRecord> = HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 1;
            if r.label == 0 {
                return Err(Error::Parse { line, msg: "label 0 is reserved for background".into() });
            }
            if r.begin > r.end {
                return Err(Error::Parse {
                    line,
                    msg: format!("begin {} after end {}", r.begin, r.end),
                });
            }
            if by_label.insert(r.label, r).is_some() {
                return Err(Error::Parse { line, msg: format!("duplicate label {}", r.label) });
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.parent == 0 {
                continue;
            }
            let line = i + 1;
            match by_label.get(&r.parent) {
                None => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("parent {} is not a known label", r.parent),
                    })
                }
                Some(p) if p.end >= r.begin => {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "parent {} ends at {} which is not before child begin {}",
                            p.label, p.end, r.begin
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{} {} {} {}\n", r.label, r.begin, r.end, r.parent))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let num = |s: &str| -> Result<u64> {
                s.parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("not a non-negative integer: {s:?}"),
                })
            };
            records.push(TrackRecord {
                label: num(fields[0])? as u32,
                begin: num(fields[1])? as usize,
                end: num(fields[2])? as usize,
                parent: num(fields[3])? as u32,
            });
        }
        // record index equals line number only without blank lines; re-run
        // validation with line numbers that point into the text
        let table = Self { records };
        table.validate().map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line: nth_nonblank_line(text, line),
                msg,
            },
            other => other,
        })?;
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn nth_nonblank_line(text: &str, n: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .nth(n - 1)
        .map(|(i, _)| i + 1)
        .unwrap_or(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_tensor_roundtrip() {
        let t = Tensor::new(vec![2, 3], TensorData::F32(vec![0.0; 6])).unwrap();
        assert_eq!(Tensor::decode(&t.encode()).unwrap(), t);
    }

    #[test]
    fn u16_label_byte_count() {
        let t = Tensor::new(vec![2, 2], TensorData::U16(vec![0, 1, 1, 2])).unwrap();
        let bytes = t.encode();
        assert_eq!(bytes.len(), 4 + 1 + 1 + 1 + 8 + 8);
        assert_eq!(&bytes[..7], b"UCMT\x01\x01\x02");
        assert_eq!(&bytes[7..15], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[15..], &[0, 0, 1, 0, 1, 0, 2, 0]);
        assert_eq!(Tensor::decode(&bytes).unwrap(), t);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = Tensor::new(vec![1], TensorData::U8(vec![7])).unwrap().encode();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Tensor::decode(&bytes), Err(Error::Decode { offset: 0, .. })));
    }

    #[test]
    fn truncated_and_unknown_dtype() {
        let bytes = Tensor::new(vec![4], TensorData::F32(vec![1.0; 4])).unwrap().encode();
        let cut = &bytes[..bytes.len() - 3];
        match Tensor::decode(cut) {
            Err(Error::Decode { offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[5] = 9;
        assert!(matches!(Tensor::decode(&bad), Err(Error::Decode { offset: 5, .. })));
    }

    #[test]
    fn frames_stack_and_split() {
        let a = Raster::from_vec(Shape::d2(1, 2), vec![1u32, 2]).unwrap();
        let b = Raster::from_vec(Shape::d2(1, 2), vec![3u32, 0]).unwrap();
        let t = Tensor::from_label_frames(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t.dims(), &[2, 1, 2]);
        assert_eq!(t.to_label_frames().unwrap(), vec![a, b]);
    }

    #[test]
    fn track_single_record() {
        let t = TrackTable::new(vec![TrackRecord { label: 1, begin: 0, end: 9, parent: 0 }]).unwrap();
        assert_eq!(t.to_text(), "1 0 9 0\n");
    }

    #[test]
    fn track_division_roundtrip() {
        let t = TrackTable::new(vec![
            TrackRecord { label: 1, begin: 0, end: 4, parent: 0 },
            TrackRecord { label: 2, begin: 5, end: 9, parent: 1 },
            TrackRecord { label: 3, begin: 5, end: 9, parent: 1 },
        ])
        .unwrap();
        let text = t.to_text();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(TrackTable::parse(&text).unwrap(), t);
    }

    #[test]
    fn unknown_parent_reports_line() {
        let err = TrackTable::parse("1 0 4 0\n2 5 9 7\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains('7'));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(TrackTable::parse("1 0 x 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(TrackTable::parse("1 0 4\n"), Err(Error::Parse { line: 1, .. })));
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor> {
        prop::collection::vec(1usize..5, 1..4).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            let d = dims.clone();
            prop_oneof![
                prop::collection::vec(any::<u8>(), n).prop_map(TensorData::U8),
                prop::collection::vec(any::<u16>(), n).prop_map(TensorData::U16),
                // bit patterns, NaN payloads included
                prop::collection::vec(any::<u32>(), n)
                    .prop_map(|v| TensorData::F32(v.into_iter().map(f32::from_bits).collect())),
            ]
            .prop_map(move |data| Tensor::new(d.clone(), data).unwrap())
        })
    }

    fn arb_tracks() -> impl Strategy<Value = TrackTable> {
        prop::collection::vec((0usize..20, 0usize..5, any::<bool>()), 0..12).prop_map(|spec| {
            let mut records: Vec<TrackRecord> = Vec::new();
            for (i, (begin, len, child)) in spec.into_iter().enumerate() {
                let parent = if child {
                    records.iter().find(|r| r.end < begin).map(|r| r.label).unwrap_or(0)
                } else {
                    0
                };
                records.push(TrackRecord { label: i as u32 + 1, begin, end: begin + len, parent });
            }
            TrackTable::new(records).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn tensor_roundtrip_is_bit_exact(t in arb_tensor()) {
            let back = Tensor::decode(&t.encode()).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            match (back.data(), t.data()) {
                (TensorData::F32(a), TensorData::F32(b)) => {
                    let a: Vec<u32> = a.iter().map(|x| x.to_bits()).collect();
                    let b: Vec<u32> = b.iter().map(|x| x.to_bits()).collect();
                    prop_assert_eq!(a, b);
                }
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn track_table_roundtrip(t in arb_tracks()) {
            prop_assert_eq!(TrackTable::parse(&t.to_text()).unwrap(), t);
        }
    }
}
