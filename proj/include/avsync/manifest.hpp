#pragma once

#include <string>

#include "avsync/synth.hpp"

namespace avsync {

// Line-oriented UTF-8 manifest. Line 1 is the format version header, line 2
// echoes the generator config, then one record per line:
//   record <id> <frames_path> <wav_path> <split> <label> <ev>;<ev>;...
// with each event tuple onset,duration,class,box_x,box_y,box_w,box_h.
void write_manifest(const DatasetManifest& m, const std::string& path);

DatasetManifest read_manifest(const std::string& path);

}  // namespace avsync
