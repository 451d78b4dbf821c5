// Copyright 2026 The mrctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Map files: a PGM image and a small YAML description.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Cell, MapError, MapMeta, OccupancyGrid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    /// Top row first.
    pub pixels: Vec<u8>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MapError + '_ {
    move |source| MapError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Occupancy probability of a pixel, then the three-way split.
pub fn classify(v: u8, meta: &MapMeta) -> Cell {
    let p = if meta.negate {
        v as f64 / 255.0
    } else {
        (255 - v) as f64 / 255.0
    };
    if p > meta.occupied_thresh {
        Cell::Occupied
    } else if p < meta.free_thresh {
        Cell::Free
    } else {
        Cell::Unknown
    }
}

/// Pixel value written for `state`: 254, 0 or 205 (inverted under
/// `negate`), or the nearest value that still classifies back to `state`
/// when the thresholds exclude the usual one.
pub fn pixel_for(state: Cell, meta: &MapMeta) -> Result<u8, MapError> {
    let canonical: u8 = match state {
        Cell::Free => 254,
        Cell::Occupied => 0,
        Cell::Unknown => 205,
    };
    let canonical = if meta.negate { 255 - canonical } else { canonical };
    let mut candidates: Vec<u8> = (0..=255).collect();
    candidates.sort_by_key(|v| ((*v as i32 - canonical as i32).abs(), *v));
    candidates
        .into_iter()
        .find(|v| classify(*v, meta) == state)
        .ok_or_else(|| MapError::BadMeta(format!("no pixel value classifies as {state:?}")))
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = None;
    for (i, c) in line.char_indices() {
        match (in_quote, c) {
            (Some(q), c) if c == q => in_quote = None,
            (None, '"' | '\'') => in_quote = Some(c),
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

fn number(key: &str, v: &str) -> Result<f64, MapError> {
    unquote(v)
        .parse::<f64>()
        .map_err(|_| MapError::BadMeta(format!("{key}: {v:?} is not a number")))
}

/// Parses the six map keys. Other keys are ignored.
pub fn parse_map_yaml(text: &str) -> Result<MapMeta, MapError> {
    let mut image = None;
    let mut resolution = None;
    let mut origin = None;
    let mut negate = None;
    let mut occ = None;
    let mut free = None;
    for line in text.lines() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(MapError::BadMeta(format!("expected `key: value`, got {line:?}")));
        };
        let value = value.trim();
        match key.trim() {
            "image" => image = Some(unquote(value).to_string()),
            "resolution" => resolution = Some(number("resolution", value)?),
            "occupied_thresh" => occ = Some(number("occupied_thresh", value)?),
            "free_thresh" => free = Some(number("free_thresh", value)?),
            "negate" => {
                negate = Some(match unquote(value) {
                    "0" | "false" => false,
                    "1" | "true" => true,
                    other => return Err(MapError::BadMeta(format!("negate: {other:?}"))),
                })
            }
            "origin" => {
                let inner = value
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| MapError::BadMeta("origin must be a [x, y, yaw] list".into()))?;
                let vals: Vec<f64> = inner
                    .split(',')
                    .map(|v| number("origin", v))
                    .collect::<Result<_, _>>()?;
                let arr: [f64; 3] = vals
                    .try_into()
                    .map_err(|_| MapError::BadMeta("origin needs three values".into()))?;
                origin = Some(arr);
            }
            _ => {}
        }
    }
    let meta = MapMeta {
        image: image.ok_or(MapError::MissingMetaKey("image"))?,
        resolution: resolution.ok_or(MapError::MissingMetaKey("resolution"))?,
        origin: origin.ok_or(MapError::MissingMetaKey("origin"))?,
        negate: negate.ok_or(MapError::MissingMetaKey("negate"))?,
        occupied_thresh: occ.ok_or(MapError::MissingMetaKey("occupied_thresh"))?,
        free_thresh: free.ok_or(MapError::MissingMetaKey("free_thresh"))?,
    };
    meta.validate()?;
    Ok(meta)
}

pub fn write_map_yaml(meta: &MapMeta) -> String {
    format!(
        "image: {}\nresolution: {}\norigin: [{}, {}, {}]\nnegate: {}\noccupied_thresh: {}\nfree_thresh: {}\n",
        meta.image,
        meta.resolution,
        meta.origin[0],
        meta.origin[1],
        meta.origin[2],
        meta.negate as u8,
        meta.occupied_thresh,
        meta.free_thresh,
    )
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, MapError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MapError::BadPgm(format!("expected {what}")))
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<Pgm, MapError> {
    let magic = data.get(..2).unwrap_or(data);
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => return Err(MapError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut h = Header { data, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(MapError::BadPgm(format!("maxval {maxval} is not supported, need 255")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| MapError::SizeMismatch("image too large".into()))?;
    let pixels = if binary {
        match data.get(h.pos) {
            Some(c) if c.is_ascii_whitespace() => h.pos += 1,
            _ => return Err(MapError::BadPgm("missing whitespace after maxval".into())),
        }
        let body = &data[h.pos..];
        if body.len() != n {
            return Err(MapError::SizeMismatch(format!(
                "{width}x{height} image needs {n} bytes, found {}",
                body.len()
            )));
        }
        body.to_vec()
    } else {
        let mut px = Vec::with_capacity(n);
        loop {
            h.skip_space();
            if h.pos >= data.len() {
                break;
            }
            let v = h.number("pixel value")?;
            let v = u8::try_from(v).map_err(|_| MapError::BadPgm(format!("pixel value {v} > 255")))?;
            px.push(v);
        }
        if px.len() != n {
            return Err(MapError::SizeMismatch(format!(
                "{width}x{height} image needs {n} values, found {}",
                px.len()
            )));
        }
        px
    };
    Ok(Pgm { width, height, pixels })
}

/// Binary P5 with maxval 255 and no comments.
pub fn write_pgm(pgm: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", pgm.width, pgm.height).into_bytes();
    out.extend_from_slice(&pgm.pixels);
    out
}

pub fn load_map(yaml_path: &Path) -> Result<OccupancyGrid, MapError> {
    let text = fs::read_to_string(yaml_path).map_err(io_err(yaml_path))?;
    let meta = parse_map_yaml(&text)?;
    let image = Path::new(&meta.image);
    let image_path = if image.is_absolute() {
        image.to_path_buf()
    } else {
        yaml_path.parent().unwrap_or(Path::new(".")).join(image)
    };
    let data = fs::read(&image_path).map_err(io_err(&image_path))?;
    let pgm = parse_pgm(&data)?;
    let mut cells = Vec::with_capacity(pgm.pixels.len());
    for row in pgm.pixels.chunks(pgm.width.max(1)).rev() {
        cells.extend(row.iter().map(|v| classify(*v, &meta)));
    }
    OccupancyGrid::from_cells(pgm.width, pgm.height, cells, meta)
}

/// Writes `<out_base>.pgm` and `<out_base>.yaml`; the YAML refers to the
/// image by file name.
pub fn save_map(grid: &OccupancyGrid, out_base: &Path) -> Result<(PathBuf, PathBuf), MapError> {
    if grid.width == 0 || grid.height == 0 {
        return Err(MapError::SizeMismatch(format!(
            "cannot save a {}x{} grid",
            grid.width, grid.height
        )));
    }
    if grid.cells.len() != grid.width * grid.height {
        return Err(MapError::SizeMismatch("cell count does not match dimensions".into()));
    }
    grid.meta.validate()?;
    let lut = [
        pixel_for(Cell::Free, &grid.meta)?,
        pixel_for(Cell::Occupied, &grid.meta)?,
        pixel_for(Cell::Unknown, &grid.meta)?,
    ];
    let px = |c: &Cell| match c {
        Cell::Free => lut[0],
        Cell::Occupied => lut[1],
        Cell::Unknown => lut[2],
    };
    let mut pixels = Vec::with_capacity(grid.cells.len());
    for row in grid.cells.chunks(grid.width).rev() {
        pixels.extend(row.iter().map(px));
    }
    let name = out_base
        .file_name()
        .ok_or_else(|| MapError::BadMeta(format!("{} has no file name", out_base.display())))?
        .to_string_lossy()
        .into_owned();
    let pgm_path = out_base.with_file_name(format!("{name}.pgm"));
    let yaml_path = out_base.with_file_name(format!("{name}.yaml"));
    let mut meta = grid.meta.clone();
    meta.image = format!("{name}.pgm");
    fs::write(
        &pgm_path,
        write_pgm(&Pgm {
            width: grid.width,
            height: grid.height,
            pixels,
        }),
    )
    .map_err(io_err(&pgm_path))?;
    fs::write(&yaml_path, write_map_yaml(&meta)).map_err(io_err(&yaml_path))?;
    Ok((pgm_path, yaml_path))
}
