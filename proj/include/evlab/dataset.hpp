#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evlab/events.hpp"

namespace evlab {

enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

const char* label_name(Label label);
Label parse_label(const std::string& s);

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct ManifestEntry {
  std::string path;  // relative to the manifest root, '/' separators
  Label label = Label::Negative;
  int threshold = 0;
};

/// Index of the event frames of one dataset split. Entries are kept sorted
/// by path; the on-disk format is one `path<TAB>label<TAB>threshold` record
/// per line, UTF-8, LF endings.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::Train;
  int threshold = 0;
  std::filesystem::path root;  // directory the entry paths are relative to

  std::size_t count(Label label) const;
  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
};

struct SequenceDir {
  std::filesystem::path dir;
  Label label = Label::Positive;
};

/// The .pgm files of a sequence directory, sorted by filename. Needs at
/// least 2 frames.
std::vector<std::filesystem::path> list_pgm_sorted(const std::filesystem::path& dir);

/// In-memory event synthesis for one sequence directory, same pairing rules
/// as build_dataset.
std::vector<EventFrame> events_from_dir(const std::filesystem::path& dir, int th,
                                        EventMode mode);

/// Synthesizes event frames for every labeled frame-sequence directory and
/// writes them plus a `manifest.tsv` under out_dir. Each directory must hold
/// a lexicographically ordered binary PGM sequence of uniform dimensions.
/// Successive mode pairs consecutive frames (N-1 outputs); Reference mode
/// diffs every later frame against the first (also N-1 outputs). Output is
/// deterministic: identical inputs yield byte-identical files.
DatasetManifest build_dataset(const std::vector<SequenceDir>& frame_dirs, int th,
                              EventMode mode, const std::filesystem::path& out_dir,
                              Split split = Split::Train);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads a manifest; with validate, checks that paths are unique and every
/// referenced file decodes as an EventFrame with the recorded threshold.
DatasetManifest read_manifest(const std::filesystem::path& path, bool validate = true);

}  // namespace evlab
