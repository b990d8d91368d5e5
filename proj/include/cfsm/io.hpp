#pragma once

// Readers and writers for every on-disk artifact:
//   trajectories  frame,id,x,y
//   detections    frame,x,y
//   labeled       frame,id,x,y,state   (optionally preceded by "# states: a,b,...")
//   tensor        {"states":[...],"env_dim":m,"matrices":[s][b][k]}

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfsm/core.hpp"

namespace cfsm::io {

inline constexpr std::string_view kTrajectoryHeader = "frame,id,x,y";
inline constexpr std::string_view kDetectionHeader = "frame,x,y";
inline constexpr std::string_view kLabeledHeader = "frame,id,x,y,state";
inline constexpr std::string_view kStatesMeta = "# states: ";

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline Frame parse_frame(std::string_view field, std::size_t line) {
  Frame v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw ParseError("invalid frame '" + std::string(field) + "'", line);
  if (v < 0) throw DataError("line " + std::to_string(line) + ": negative frame");
  return v;
}

inline double parse_real(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty() || !std::isfinite(v))
    throw ParseError("invalid number '" + std::string(field) + "'", line);
  return v;
}

inline std::string_view parse_name(std::string_view field, std::size_t line, const char* what) {
  if (field.empty()) throw ParseError(std::string("empty ") + what, line);
  return field;
}

/// Shortest representation that reads back to the identical double.
inline void put_real(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline void put_real17(std::string& out, double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

/// Reads a whole stream into lines with line numbers starting at 1.
struct LineReader {
  explicit LineReader(std::istream& s) : in(s) {}
  std::istream& in;
  std::size_t number = 0;
  std::string buffer;

  bool next(std::string_view& line) {
    if (!std::getline(in, buffer)) return false;
    ++number;
    line = strip_cr(buffer);
    return true;
  }
};

inline void expect_header(LineReader& r, std::string_view header) {
  std::string_view line;
  if (!r.next(line)) throw ParseError("missing header '" + std::string(header) + "'", 1);
  if (line != header)
    throw ParseError("expected header '" + std::string(header) + "'", r.number);
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  return f;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << content;
  if (!f) throw DataError("write failed for '" + path + "'");
}

/// Groups raw samples per id, enforcing strictly increasing frames in file order.
struct TrajectoryBuilder {
  std::map<std::string, Trajectory, std::less<>> by_id;
  std::map<std::string, std::size_t, std::less<>> last_line;

  Trajectory& add(std::string_view id, Frame frame, Vec2 p, std::size_t line) {
    auto it = by_id.find(id);
    if (it == by_id.end()) it = by_id.emplace(std::string(id), Trajectory{std::string(id), {}}).first;
    auto& t = it->second;
    if (!t.samples.empty() && frame <= t.samples.back().frame)
      throw DataError("line " + std::to_string(line) + ": frames for id '" + std::string(id) +
                      "' are not strictly increasing");
    t.samples.push_back({frame, p});
    return t;
  }
};

}  // namespace detail

// ---------------------------------------------------------------- trajectories

/// Parses `frame,id,x,y`. Single missing frames are filled by linear
/// interpolation; longer gaps are rejected. Result is sorted by id.
inline std::vector<Trajectory> parse_trajectories(std::istream& in) {
  detail::LineReader r{in};
  detail::expect_header(r, kTrajectoryHeader);
  detail::TrajectoryBuilder b;
  std::string_view line;
  while (r.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line);
    if (f.size() != 4) throw ParseError("expected 4 fields, got " + std::to_string(f.size()), r.number);
    const Frame frame = detail::parse_frame(f[0], r.number);
    const auto id = detail::parse_name(f[1], r.number, "id");
    const Vec2 p{detail::parse_real(f[2], r.number), detail::parse_real(f[3], r.number)};
    auto& t = b.add(id, frame, p, r.number);
    const auto n = t.samples.size();
    if (n < 2) continue;
    const Frame gap = t.samples[n - 1].frame - t.samples[n - 2].frame;
    if (gap == 2) {
      const Vec2 a = t.samples[n - 2].pos;
      const Vec2 mid = 0.5 * (a + p);
      t.samples.insert(t.samples.end() - 1, TimedPosition{frame - 1, mid});
    } else if (gap > 2) {
      throw DataError("line " + std::to_string(r.number) + ": gap of " + std::to_string(gap - 1) +
                      " frames for id '" + std::string(id) + "'");
    }
  }
  std::vector<Trajectory> out;
  out.reserve(b.by_id.size());
  for (auto& [id, t] : b.by_id) out.push_back(std::move(t));
  return out;
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
  auto f = detail::open_in(path);
  return parse_trajectories(f);
}

inline std::string format_trajectories(const std::vector<Trajectory>& trajectories) {
  std::string out(kTrajectoryHeader);
  out += '\n';
  for (const auto& t : trajectories) {
    for (const auto& s : t.samples) {
      out += std::to_string(s.frame);
      out += ',';
      out += t.id;
      out += ',';
      detail::put_real(out, s.pos.x);
      out += ',';
      detail::put_real(out, s.pos.y);
      out += '\n';
    }
  }
  return out;
}

inline void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
  detail::write_file(path, format_trajectories(trajectories));
}

// ------------------------------------------------------------------ detections

/// Parses `frame,x,y`; one DetectionFrame per frame index present, ascending,
/// points kept in file order.
inline std::vector<DetectionFrame> parse_detections(std::istream& in) {
  detail::LineReader r{in};
  detail::expect_header(r, kDetectionHeader);
  std::map<Frame, std::vector<Vec2>> frames;
  std::string_view line;
  while (r.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line);
    if (f.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(f.size()), r.number);
    const Frame frame = detail::parse_frame(f[0], r.number);
    frames[frame].push_back({detail::parse_real(f[1], r.number), detail::parse_real(f[2], r.number)});
  }
  std::vector<DetectionFrame> out;
  out.reserve(frames.size());
  for (auto& [frame, pts] : frames) out.push_back({frame, std::move(pts)});
  return out;
}

inline std::vector<DetectionFrame> load_detections(const std::string& path) {
  auto f = detail::open_in(path);
  return parse_detections(f);
}

inline std::string format_detections(const std::vector<DetectionFrame>& frames) {
  std::string out(kDetectionHeader);
  out += '\n';
  for (const auto& fr : frames) {
    for (const auto& p : fr.points) {
      out += std::to_string(fr.frame);
      out += ',';
      detail::put_real(out, p.x);
      out += ',';
      detail::put_real(out, p.y);
      out += '\n';
    }
  }
  return out;
}

inline void save_detections(const std::string& path, const std::vector<DetectionFrame>& frames) {
  detail::write_file(path, format_detections(frames));
}

// --------------------------------------------------------------------- labeled

struct LabeledData {
  std::vector<Trajectory> trajectories;
  std::vector<StateLabelSeries> labels;
  StateSet states;
};

/// Writes the state catalogue as a leading `# states:` line so that state
/// order and unused states survive a round trip.
inline std::string format_labeled(const std::vector<Trajectory>& trajectories,
                                  const std::vector<StateLabelSeries>& labels,
                                  const StateSet& states) {
  if (trajectories.size() != labels.size())
    throw DataError("trajectory and label counts differ");
  std::string out(kStatesMeta);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ',';
    out += states.name(i);
  }
  out += '\n';
  out += kLabeledHeader;
  out += '\n';
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto& l = labels[i];
    if (l.id != t.id) throw DataError("label series '" + l.id + "' does not match trajectory '" + t.id + "'");
    if (t.samples.empty()) continue;
    if (l.first_frame != t.first_frame() || l.labels.size() != t.samples.size())
      throw DataError("labels for '" + t.id + "' do not span the trajectory");
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
      const int s = l.labels[k];
      if (s < 0 || static_cast<std::size_t>(s) >= states.size())
        throw DataError("label out of range for '" + t.id + "'");
      out += std::to_string(t.samples[k].frame);
      out += ',';
      out += t.id;
      out += ',';
      detail::put_real(out, t.samples[k].pos.x);
      out += ',';
      detail::put_real(out, t.samples[k].pos.y);
      out += ',';
      out += states.name(static_cast<std::size_t>(s));
      out += '\n';
    }
  }
  return out;
}

inline void save_labeled(const std::string& path, const std::vector<Trajectory>& trajectories,
                         const std::vector<StateLabelSeries>& labels, const StateSet& states) {
  detail::write_file(path, format_labeled(trajectories, labels, states));
}

/// Parses `frame,id,x,y,state`. With a `# states:` line, any other state name
/// is a data error; without one, states are catalogued in order of first
/// appearance. Every id must cover a contiguous frame range.
inline LabeledData parse_labeled(std::istream& in) {
  detail::LineReader r{in};
  std::string_view line;
  std::vector<std::string> declared;
  bool have_meta = false;
  while (true) {
    if (!r.next(line)) throw ParseError("missing header '" + std::string(kLabeledHeader) + "'", r.number + 1);
    if (line.starts_with(kStatesMeta)) {
      have_meta = true;
      for (auto n : detail::split(line.substr(kStatesMeta.size())))
        declared.emplace_back(detail::parse_name(n, r.number, "state name"));
      continue;
    }
    if (!line.empty() && line.front() == '#') continue;
    if (line != kLabeledHeader) throw ParseError("expected header '" + std::string(kLabeledHeader) + "'", r.number);
    break;
  }

  std::vector<std::string> names = declared;
  std::map<std::string, int, std::less<>> index;
  if (have_meta) {
    StateSet check(declared);  // duplicate/empty names are data errors
    for (std::size_t i = 0; i < declared.size(); ++i) index.emplace(declared[i], static_cast<int>(i));
  }

  detail::TrajectoryBuilder b;
  std::map<std::string, StateLabelSeries, std::less<>> labels;
  while (r.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line);
    if (f.size() != 5) throw ParseError("expected 5 fields, got " + std::to_string(f.size()), r.number);
    const Frame frame = detail::parse_frame(f[0], r.number);
    const auto id = detail::parse_name(f[1], r.number, "id");
    const Vec2 p{detail::parse_real(f[2], r.number), detail::parse_real(f[3], r.number)};
    const auto state = detail::parse_name(f[4], r.number, "state");
    auto it = index.find(state);
    if (it == index.end()) {
      if (have_meta)
        throw DataError("line " + std::to_string(r.number) + ": unknown state '" + std::string(state) + "'");
      it = index.emplace(std::string(state), static_cast<int>(names.size())).first;
      names.emplace_back(state);
    }
    auto& t = b.add(id, frame, p, r.number);
    if (t.samples.size() >= 2 && t.samples[t.samples.size() - 2].frame + 1 != frame)
      throw DataError("line " + std::to_string(r.number) + ": labeled series for '" + std::string(id) +
                      "' is not contiguous");
    auto& ls = labels[std::string(id)];
    if (ls.labels.empty()) {
      ls.id = std::string(id);
      ls.first_frame = frame;
    }
    ls.labels.push_back(it->second);
  }

  LabeledData out;
  if (names.empty()) throw DataError("labeled file declares no states");
  out.states = StateSet(names);
  for (auto& [id, t] : b.by_id) {
    out.trajectories.push_back(std::move(t));
    out.labels.push_back(std::move(labels.at(id)));
  }
  return out;
}

inline LabeledData load_labeled(const std::string& path) {
  auto f = detail::open_in(path);
  return parse_labeled(f);
}

// ---------------------------------------------------------------------- tensor

inline std::string format_tensor(const TransitionTensor& tensor) {
  std::string out = "{\n  \"states\": [";
  for (std::size_t i = 0; i < tensor.states.size(); ++i) {
    if (i) out += ", ";
    out += nlohmann::json(tensor.states.name(i)).dump();
  }
  out += "],\n  \"env_dim\": ";
  out += std::to_string(tensor.env_dim);
  out += ",\n  \"matrices\": [";
  for (std::size_t s = 0; s < tensor.matrices.size(); ++s) {
    const auto& m = tensor.matrix(s);
    out += s ? ",\n    [" : "\n    [";
    for (Eigen::Index b = 0; b < m.rows(); ++b) {
      out += b ? ",\n      [" : "\n      [";
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        if (k) out += ", ";
        detail::put_real17(out, m(b, k));
      }
      out += ']';
    }
    out += "\n    ]";
  }
  out += "\n  ]\n}\n";
  return out;
}

inline void save_tensor(const std::string& path, const TransitionTensor& tensor) {
  detail::write_file(path, format_tensor(tensor));
}

inline TransitionTensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("tensor JSON must be an object");
  for (const char* key : {"states", "env_dim", "matrices"})
    if (!j.contains(key)) throw DataError(std::string("tensor JSON lacks '") + key + "'");
  const auto& js = j.at("states");
  const auto& jm = j.at("matrices");
  if (!js.is_array() || !jm.is_array() || !j.at("env_dim").is_number_integer())
    throw DataError("tensor JSON has wrong field types");
  std::vector<std::string> names;
  for (const auto& n : js) {
    if (!n.is_string()) throw DataError("state names must be strings");
    names.push_back(n.get<std::string>());
  }
  const auto env_dim = j.at("env_dim").get<long long>();
  if (env_dim < 1 || env_dim > 1'000'000) throw DataError("env_dim out of range");
  TransitionTensor t = TransitionTensor::zeros(StateSet(std::move(names)), static_cast<int>(env_dim));
  const auto n = t.n_states();
  if (jm.size() != n) throw DataError("matrix count does not match state count");
  for (std::size_t s = 0; s < n; ++s) {
    const auto& rows = jm[s];
    if (!rows.is_array() || rows.size() != n)
      throw DataError("matrix " + std::to_string(s) + " row count does not match state count");
    for (std::size_t b = 0; b < n; ++b) {
      const auto& row = rows[b];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(env_dim))
        throw DataError("matrix " + std::to_string(s) + " row " + std::to_string(b) + " length != env_dim");
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (!row[k].is_number()) throw DataError("tensor entries must be numbers");
        t.matrix(s)(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = row[k].get<double>();
      }
    }
  }
  return t;
}

inline TransitionTensor parse_tensor(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tensor JSON: ") + e.what());
  }
  return tensor_from_json(j);
}

inline std::string read_file(const std::string& path) {
  auto f = detail::open_in(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline TransitionTensor load_tensor(const std::string& path) { return parse_tensor(read_file(path)); }

}  // namespace cfsm::io
