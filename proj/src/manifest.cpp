#include "avsync/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace avsync {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    check(pos == s.size(), "");
    return v;
  } catch (...) {
    fail(cat("manifest: bad number '", s, "' in ", ctx));
  }
}

long long parse_int(const std::string& s, const std::string& ctx) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    check(pos == s.size(), "");
    return v;
  } catch (...) {
    fail(cat("manifest: bad integer '", s, "' in ", ctx));
  }
}

}  // namespace

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os << "avts-manifest v" << m.version << "\n";
  const SynthConfig& c = m.config;
  os << "config"
     << " num_videos=" << c.num_videos << " duration=" << fmt_double(c.duration)
     << " fps=" << fmt_double(c.fps) << " sample_rate=" << c.sample_rate
     << " height=" << c.height << " width=" << c.width << " num_classes=" << c.num_classes
     << " events_min=" << c.events_min << " events_max=" << c.events_max
     << " event_min_dur=" << fmt_double(c.event_min_dur)
     << " event_max_dur=" << fmt_double(c.event_max_dur)
     << " distractor_motion_level=" << fmt_double(c.distractor_motion_level)
     << " noise_level=" << fmt_double(c.noise_level) << " box_frac=" << fmt_double(c.box_frac)
     << " train_frac=" << fmt_double(c.train_frac) << " val_frac=" << fmt_double(c.val_frac)
     << " seed=" << c.seed << "\n";
  for (const auto& r : m.records) {
    os << "record " << r.id << " " << r.frames_path << " " << r.wav_path << " " << r.split << " "
       << r.label << " ";
    for (std::size_t e = 0; e < r.events.size(); ++e) {
      const Event& ev = r.events[e];
      if (e) os << ";";
      os << fmt_double(ev.onset) << "," << fmt_double(ev.duration) << "," << ev.cls << ","
         << ev.box_x << "," << ev.box_y << "," << ev.box_w << "," << ev.box_h;
    }
    os << "\n";
  }
  check(os.good(), cat("write failed: ", path));
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), cat("cannot open manifest: ", path));
  DatasetManifest m;
  m.root_dir = std::filesystem::path(path).parent_path().string();
  if (m.root_dir.empty()) m.root_dir = ".";

  std::string line;
  check(static_cast<bool>(std::getline(is, line)), cat(path, ": empty manifest"));
  check(line.rfind("avts-manifest v", 0) == 0, cat(path, ": missing version header"));
  m.version = static_cast<int>(parse_int(line.substr(15), "version header"));
  check(m.version == 1, cat(path, ": manifest version ", m.version, " unsupported (expected 1)"));

  check(static_cast<bool>(std::getline(is, line)), cat(path, ": missing config line"));
  {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    check(tok == "config", cat(path, ": expected config line, got '", tok, "'"));
    SynthConfig& c = m.config;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      check(eq != std::string::npos, cat(path, ": bad config token '", tok, "'"));
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "num_videos") c.num_videos = parse_int(val, key);
      else if (key == "duration") c.duration = parse_double(val, key);
      else if (key == "fps") c.fps = parse_double(val, key);
      else if (key == "sample_rate") c.sample_rate = parse_int(val, key);
      else if (key == "height") c.height = parse_int(val, key);
      else if (key == "width") c.width = parse_int(val, key);
      else if (key == "num_classes") c.num_classes = parse_int(val, key);
      else if (key == "events_min") c.events_min = parse_int(val, key);
      else if (key == "events_max") c.events_max = parse_int(val, key);
      else if (key == "event_min_dur") c.event_min_dur = parse_double(val, key);
      else if (key == "event_max_dur") c.event_max_dur = parse_double(val, key);
      else if (key == "distractor_motion_level") c.distractor_motion_level = parse_double(val, key);
      else if (key == "noise_level") c.noise_level = parse_double(val, key);
      else if (key == "box_frac") c.box_frac = parse_double(val, key);
      else if (key == "train_frac") c.train_frac = parse_double(val, key);
      else if (key == "val_frac") c.val_frac = parse_double(val, key);
      else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(val, key));
      else fail(cat(path, ": unknown config key '", key, "'"));
    }
  }

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    check(tok == "record", cat(path, ": expected record line, got '", tok, "'"));
    AVRecord r;
    std::string events;
    ss >> r.id >> r.frames_path >> r.wav_path >> r.split >> r.label;
    check(!ss.fail(), cat(path, ": malformed record line: ", line));
    check(r.split == "train" || r.split == "val" || r.split == "test",
          cat(path, ": unknown split '", r.split, "'"));
    if (ss >> events) {
      std::istringstream es(events);
      std::string ev_tok;
      while (std::getline(es, ev_tok, ';')) {
        std::istringstream fs(ev_tok);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(fs, field, ',')) fields.push_back(field);
        check(fields.size() == 7, cat(path, ": event tuple needs 7 fields: ", ev_tok));
        Event ev;
        ev.onset = parse_double(fields[0], "event onset");
        ev.duration = parse_double(fields[1], "event duration");
        ev.cls = static_cast<int>(parse_int(fields[2], "event class"));
        ev.box_x = static_cast<int>(parse_int(fields[3], "event box"));
        ev.box_y = static_cast<int>(parse_int(fields[4], "event box"));
        ev.box_w = static_cast<int>(parse_int(fields[5], "event box"));
        ev.box_h = static_cast<int>(parse_int(fields[6], "event box"));
        r.events.push_back(ev);
      }
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace avsync
