#include "evlab/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace evlab {

namespace fs = std::filesystem;

const char* label_name(Label label) {
  return label == Label::Positive ? "positive" : "negative";
}

Label parse_label(const std::string& s) {
  if (s == "positive") return Label::Positive;
  if (s == "negative") return Label::Negative;
  throw DecodeError("manifest: unknown label '" + s + "'");
}

std::size_t DatasetManifest::count(Label label) const {
  std::size_t n = 0;
  for (const auto& e : entries)
    if (e.label == label) ++n;
  return n;
}

std::vector<fs::path> list_pgm_sorted(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  if (files.size() < 2) {
    throw ValidationError("sequence directory needs at least 2 .pgm frames: " +
                          dir.string());
  }
  return files;
}

std::vector<EventFrame> events_from_dir(const fs::path& dir, int th, EventMode mode) {
  const auto files = list_pgm_sorted(dir);
  std::vector<EventFrame> events;
  events.reserve(files.size() - 1);

  GrayFrame reference = load_pgm_file(files[0]);
  GrayFrame prev = reference;
  for (std::size_t i = 1; i < files.size(); ++i) {
    GrayFrame curr = load_pgm_file(files[i]);
    if (curr.width != reference.width || curr.height != reference.height) {
      throw ValidationError("mixed frame dimensions in sequence " + dir.string() + " at " +
                            files[i].string());
    }
    EventFrame ev = mode == EventMode::Successive ? diff_events(prev, curr, th)
                                                  : ref_events(reference, curr, th);
    ev.source_index = static_cast<std::uint32_t>(i);
    events.push_back(std::move(ev));
    prev = std::move(curr);
  }
  return events;
}

DatasetManifest build_dataset(const std::vector<SequenceDir>& frame_dirs, int th,
                              EventMode mode, const fs::path& out_dir, Split split) {
  if (frame_dirs.empty()) {
    throw ValidationError("build_dataset: no input directories");
  }
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.split = split;
  manifest.threshold = th;
  manifest.root = out_dir;

  for (std::size_t d = 0; d < frame_dirs.size(); ++d) {
    const auto& seq = frame_dirs[d];
    const auto events = events_from_dir(seq.dir, th, mode);
    for (const auto& ev : events) {
      char name[48];
      std::snprintf(name, sizeof name, "%s_%03zu_%04u.evf", label_name(seq.label), d,
                    ev.source_index);
      save_evf(ev, out_dir / name);
      manifest.entries.push_back({name, seq.label, th});
    }
  }

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  write_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::string out;
  std::vector<const ManifestEntry*> sorted;
  sorted.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const ManifestEntry* a, const ManifestEntry* b) { return a->path < b->path; });
  for (const auto* e : sorted) {
    out += e->path;
    out += '\t';
    out += label_name(e->label);
    out += '\t';
    out += std::to_string(e->threshold);
    out += '\n';
  }
  write_file_atomic(path, out);
}

DatasetManifest read_manifest(const fs::path& path, bool validate) {
  const Bytes raw = read_file(path);
  DatasetManifest manifest;
  manifest.root = path.parent_path();

  std::string text(raw.begin(), raw.end());
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw DecodeError(path.string() + ":" + std::to_string(lineno) +
                        ": expected path<TAB>label<TAB>threshold");
    }
    ManifestEntry e;
    e.path = line.substr(0, t1);
    e.label = parse_label(line.substr(t1 + 1, t2 - t1 - 1));
    try {
      e.threshold = std::stoi(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw DecodeError(path.string() + ":" + std::to_string(lineno) + ": bad threshold");
    }
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) {
    throw ValidationError("manifest is empty: " + path.string());
  }
  manifest.threshold = manifest.entries.front().threshold;

  if (validate) {
    std::set<std::string> seen;
    for (const auto& e : manifest.entries) {
      if (!seen.insert(e.path).second) {
        throw ValidationError("manifest: duplicate path " + e.path);
      }
      const EventFrame ev = load_evf_file(manifest.resolve(e));
      if (ev.threshold != e.threshold) {
        throw ValidationError("manifest: threshold mismatch for " + e.path + " (file " +
                              std::to_string(ev.threshold) + ", manifest " +
                              std::to_string(e.threshold) + ")");
      }
    }
  }
  return manifest;
}

}  // namespace evlab
