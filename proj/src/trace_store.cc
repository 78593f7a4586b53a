// Copyright 2026 The pathlens Authors
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

#include "pathlens/trace_store.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>
#include <tuple>

#include "json.hpp"

namespace pathlens {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "store records are written in host order, which must be "
              "little-endian");

namespace {

constexpr char kManifestName[] = "MANIFEST";
constexpr char kLockName[] = "LOCK";
constexpr char kTraceIdsName[] = "trace_ids.log";
constexpr Micros kMicrosPerDay = 86'400'000'000LL;

[[noreturn]] void throw_io(const std::string& what, const fs::path& path) {
  throw Error(ErrorKind::kIo, what + " " + path.string() + ": " +
                                  std::strerror(errno));
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ---- binary codec ----

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

void put_string16(std::string& buf, std::string_view s) {
  if (s.size() > UINT16_MAX) {
    throw Error(ErrorKind::kInvalidArgument, "identifier longer than 65535 bytes");
  }
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(s.size()));
  buf.append(s);
}

void put_string32(std::string& buf, std::string_view s) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

class Cursor {
 public:
  explicit Cursor(std::string_view data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view get_bytes(std::size_t n) {
    need(n);
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string_view get_string16() { return get_bytes(get<std::uint16_t>()); }
  std::string_view get_string32() { return get_bytes(get<std::uint32_t>()); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw Error(ErrorKind::kIo, "corrupt store segment (truncated record)");
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

// path segment record: u32 path id, u32 occurrences, f64 mean, i64 timestamp,
// u8 flags, string16 trace id
void encode_path(std::string& buf, std::uint32_t path_id, const PathRecord& r) {
  put<std::uint32_t>(buf, path_id);
  put<std::uint32_t>(buf, r.occurrences);
  put<double>(buf, r.exec_time_mean);
  put<std::int64_t>(buf, r.timestamp);
  put<std::uint8_t>(buf, r.async ? 1 : 0);
  put_string16(buf, r.trace_id);
}

// e2e segment record: i64 timestamp, i64 response time, string16 trace id
void encode_e2e(std::string& buf, const E2ERecord& r) {
  put<std::int64_t>(buf, r.timestamp);
  put<std::int64_t>(buf, r.response_time);
  put_string16(buf, r.trace_id);
}

std::string read_prefix(const fs::path& path, std::uint64_t length) {
  std::string out;
  if (length == 0) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open", path);
  out.resize(length);
  in.read(out.data(), static_cast<std::streamsize>(length));
  if (static_cast<std::uint64_t>(in.gcount()) != length) {
    throw Error(ErrorKind::kIo, "store file shorter than committed length: " +
                                    path.string());
  }
  return out;
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) throw_io("cannot open directory", dir);
  ::fsync(fd);
  ::close(fd);
}

// Truncates any uncommitted tail, appends `bytes` and syncs.
void append_committed(const fs::path& path, std::uint64_t committed,
                      std::string_view bytes) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd < 0) throw_io("cannot open", path);
  auto fail = [&](const char* what) {
    int saved = errno;
    ::close(fd);
    errno = saved;
    throw_io(what, path);
  };
  if (::ftruncate(fd, static_cast<off_t>(committed)) != 0) fail("cannot truncate");
  if (::lseek(fd, static_cast<off_t>(committed), SEEK_SET) < 0) fail("cannot seek");
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("cannot write");
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) fail("cannot sync");
  ::close(fd);
}

fs::path dict_path(const fs::path& dir, const RootEntry& root) {
  return dir / "roots" / root.dir / (root.dict_generation + ".dict");
}

fs::path segment_path(const fs::path& dir, const RootEntry& root,
                      std::int64_t day, const SegmentEntry& seg,
                      const char* ext) {
  return dir / "roots" / root.dir /
         (std::to_string(day) + "." + seg.generation + ext);
}

std::vector<std::string> load_dict(const fs::path& dir, const RootEntry& root) {
  std::vector<std::string> out;
  out.reserve(root.dict_entries);
  std::string bytes = read_prefix(dict_path(dir, root), root.dict_bytes);
  Cursor cur(bytes);
  while (!cur.done()) out.emplace_back(cur.get_string32());
  if (out.size() != root.dict_entries) {
    throw Error(ErrorKind::kIo, "path dictionary count mismatch for root " +
                                    root.name);
  }
  return out;
}

template <typename Fn>
void for_each_path(const fs::path& dir, const RootEntry& root,
                   const SegmentEntry& seg, std::int64_t day,
                   const std::vector<std::string>& dict, Fn&& fn) {
  std::string bytes =
      read_prefix(segment_path(dir, root, day, seg, ".paths"), seg.paths_bytes);
  Cursor cur(bytes);
  while (!cur.done()) {
    auto path_id = cur.get<std::uint32_t>();
    auto occurrences = cur.get<std::uint32_t>();
    auto mean = cur.get<double>();
    auto ts = cur.get<std::int64_t>();
    auto flags = cur.get<std::uint8_t>();
    std::string_view trace_id = cur.get_string16();
    if (path_id >= dict.size()) {
      throw Error(ErrorKind::kIo, "path record references unknown path id");
    }
    fn(path_id, occurrences, mean, ts, (flags & 1) != 0, trace_id);
  }
}

template <typename Fn>
void for_each_e2e(const fs::path& dir, const RootEntry& root,
                  const SegmentEntry& seg, std::int64_t day, Fn&& fn) {
  std::string bytes =
      read_prefix(segment_path(dir, root, day, seg, ".e2e"), seg.e2e_bytes);
  Cursor cur(bytes);
  while (!cur.done()) {
    auto ts = cur.get<std::int64_t>();
    auto rt = cur.get<std::int64_t>();
    std::string_view trace_id = cur.get_string16();
    fn(ts, rt, trace_id);
  }
}

Manifest read_manifest(const fs::path& dir) {
  fs::path path = dir / kManifestName;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "no trace store at " + dir.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return Manifest::from_json(ss.str());
}

std::string day_label(std::int64_t day) {
  std::time_t secs = static_cast<std::time_t>(day * 86400);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d", &tm);
  return buf;
}

}  // namespace

std::int64_t day_of(Micros timestamp) {
  std::int64_t day = timestamp / kMicrosPerDay;
  if (timestamp % kMicrosPerDay < 0) --day;
  return day;
}

// ---- Manifest ----

std::string Manifest::to_json() const {
  json roots_json = json::array();
  for (const RootEntry& r : roots) {
    json segs = json::object();
    for (const auto& [day, s] : r.segments) {
      segs[std::to_string(day)] = {{"generation", s.generation},
                                   {"paths_bytes", s.paths_bytes},
                                   {"e2e_bytes", s.e2e_bytes},
                                   {"path_records", s.path_records},
                                   {"e2e_records", s.e2e_records}};
    }
    roots_json.push_back({{"name", r.name},
                          {"dir", r.dir},
                          {"dict_generation", r.dict_generation},
                          {"dict_entries", r.dict_entries},
                          {"dict_bytes", r.dict_bytes},
                          {"path_records", r.path_records},
                          {"e2e_records", r.e2e_records},
                          {"segments", std::move(segs)}});
  }
  json doc = {{"format_version", format_version},
              {"commit_seq", commit_seq},
              {"processed_traces", processed_traces},
              {"processed_digest", processed_digest},
              {"trace_ids_bytes", trace_ids_bytes},
              {"roots", std::move(roots_json)}};
  return doc.dump(2);
}

Manifest Manifest::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("corrupt store manifest: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    throw Error(ErrorKind::kVersionMismatch, "store manifest has no format_version");
  }
  Manifest m;
  m.format_version = doc["format_version"].get<int>();
  if (m.format_version != kStoreFormatVersion) {
    throw Error(ErrorKind::kVersionMismatch,
                "store format version " + std::to_string(m.format_version) +
                    " is not supported (expected " +
                    std::to_string(kStoreFormatVersion) + ")");
  }
  try {
    m.commit_seq = doc.at("commit_seq").get<std::uint64_t>();
    m.processed_traces = doc.at("processed_traces").get<std::uint64_t>();
    m.processed_digest = doc.at("processed_digest").get<std::string>();
    m.trace_ids_bytes = doc.at("trace_ids_bytes").get<std::uint64_t>();
    for (const json& jr : doc.at("roots")) {
      RootEntry r;
      r.name = jr.at("name").get<std::string>();
      r.dir = jr.at("dir").get<std::string>();
      r.dict_generation = jr.at("dict_generation").get<std::string>();
      r.dict_entries = jr.at("dict_entries").get<std::uint64_t>();
      r.dict_bytes = jr.at("dict_bytes").get<std::uint64_t>();
      r.path_records = jr.at("path_records").get<std::uint64_t>();
      r.e2e_records = jr.at("e2e_records").get<std::uint64_t>();
      for (const auto& [day, js] : jr.at("segments").items()) {
        SegmentEntry s;
        s.generation = js.at("generation").get<std::string>();
        s.paths_bytes = js.at("paths_bytes").get<std::uint64_t>();
        s.e2e_bytes = js.at("e2e_bytes").get<std::uint64_t>();
        s.path_records = js.at("path_records").get<std::uint64_t>();
        s.e2e_records = js.at("e2e_records").get<std::uint64_t>();
        r.segments.emplace(std::stoll(day), std::move(s));
      }
      m.roots.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("corrupt store manifest: ") + e.what());
  }
  std::sort(m.roots.begin(), m.roots.end(),
            [](const RootEntry& a, const RootEntry& b) { return a.name < b.name; });
  return m;
}

const RootEntry* Manifest::find_root(std::string_view name) const {
  auto it = std::lower_bound(
      roots.begin(), roots.end(), name,
      [](const RootEntry& r, std::string_view n) { return r.name < n; });
  if (it == roots.end() || it->name != name) return nullptr;
  return &*it;
}

// ---- TraceStore ----

TraceStore::TraceStore(TraceStore&& other) noexcept
    : dir_(std::move(other.dir_)),
      lock_fd_(std::exchange(other.lock_fd_, -1)),
      manifest_(std::move(other.manifest_)),
      processed_(std::move(other.processed_)),
      roots_(std::move(other.roots_)),
      digest_sum_(other.digest_sum_),
      digest_xor_(other.digest_xor_) {}

TraceStore& TraceStore::operator=(TraceStore&& other) noexcept {
  if (this != &other) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    dir_ = std::move(other.dir_);
    lock_fd_ = std::exchange(other.lock_fd_, -1);
    manifest_ = std::move(other.manifest_);
    processed_ = std::move(other.processed_);
    roots_ = std::move(other.roots_);
    digest_sum_ = other.digest_sum_;
    digest_xor_ = other.digest_xor_;
  }
  return *this;
}

TraceStore::~TraceStore() {
  if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the flock
}

TraceStore TraceStore::open(const fs::path& dir, bool create) {
  std::error_code ec;
  const bool exists = fs::exists(dir / kManifestName, ec);
  if (!exists && !create) {
    throw Error(ErrorKind::kIo, "no trace store at " + dir.string());
  }
  if (!exists) {
    fs::create_directories(dir / "roots", ec);
    if (ec) {
      throw Error(ErrorKind::kIo, "cannot create store directory " +
                                      dir.string() + ": " + ec.message());
    }
  }

  TraceStore store;
  store.dir_ = dir;
  fs::path lock_path = dir / kLockName;
  store.lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (store.lock_fd_ < 0) throw_io("cannot open", lock_path);
  if (::flock(store.lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    throw Error(ErrorKind::kIo,
                "store " + dir.string() + " is locked by another writer");
  }
  if (!exists) {
    Manifest empty;
    empty.processed_digest = hex64(0) + hex64(0);
    store.write_manifest(empty);
  }
  store.load();
  return store;
}

void TraceStore::load() {
  manifest_ = read_manifest(dir_);
  std::string ids = read_prefix(dir_ / kTraceIdsName, manifest_.trace_ids_bytes);
  Cursor cur(ids);
  while (!cur.done()) {
    std::string id(cur.get_string16());
    std::uint64_t h = fnv1a64(id);
    digest_sum_ += h;
    digest_xor_ ^= h;
    processed_.insert(std::move(id));
  }
  for (const RootEntry& root : manifest_.roots) {
    RootState& state = roots_[root.name];
    std::vector<std::string> dict = load_dict(dir_, root);
    for (std::uint32_t i = 0; i < dict.size(); ++i) {
      state.path_ids.emplace(std::move(dict[i]), i);
    }
  }
}

bool TraceStore::contains_trace(std::string_view trace_id) const {
  return processed_.contains(std::string(trace_id));
}

void TraceStore::write_manifest(const Manifest& next) {
  fs::path tmp = dir_ / (std::string(kManifestName) + ".tmp");
  append_committed(tmp, 0, next.to_json());
  std::error_code ec;
  fs::rename(tmp, dir_ / kManifestName, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot publish manifest: " + ec.message());
  }
  fsync_dir(dir_);
}

RootEntry& TraceStore::root_entry(Manifest& m, const std::string& name) {
  auto it = std::lower_bound(
      m.roots.begin(), m.roots.end(), name,
      [](const RootEntry& r, const std::string& n) { return r.name < n; });
  if (it != m.roots.end() && it->name == name) return *it;
  RootEntry entry;
  entry.name = name;
  entry.dir = "r" + std::to_string(m.roots.size());
  entry.dict_generation = "g0";
  std::error_code ec;
  fs::create_directories(dir_ / "roots" / entry.dir, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create root directory: " + ec.message());
  }
  return *m.roots.insert(it, std::move(entry));
}

CommitReceipt TraceStore::append_records(std::span<const PathRecord> paths,
                                         std::span<const E2ERecord> e2e) {
  for (const PathRecord& r : paths) {
    if (r.occurrences < 1 || !(r.exec_time_mean >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "malformed path record for trace " + r.trace_id);
    }
  }
  for (const E2ERecord& r : e2e) {
    if (r.response_time < 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "negative response time for trace " + r.trace_id);
    }
  }

  Manifest next = manifest_;
  struct DayBuffers {
    std::string paths, e2e;
    std::uint64_t n_paths = 0, n_e2e = 0;
  };
  struct RootBuffers {
    std::string dict;
    std::vector<std::pair<std::string, std::uint32_t>> new_ids;
    std::unordered_map<std::string, std::uint32_t> pending;
    std::map<std::int64_t, DayBuffers> days;
  };
  std::map<std::string, RootBuffers> buffers;

  for (const PathRecord& r : paths) {
    std::string root = r.path.root().canonical();
    RootEntry& entry = root_entry(next, root);
    RootBuffers& rb = buffers[root];
    std::uint32_t id;
    const auto& known = roots_[root].path_ids;
    if (auto it = known.find(r.path.canonical()); it != known.end()) {
      id = it->second;
    } else if (auto jt = rb.pending.find(r.path.canonical());
               jt != rb.pending.end()) {
      id = jt->second;
    } else {
      id = static_cast<std::uint32_t>(entry.dict_entries + rb.new_ids.size());
      rb.pending.emplace(r.path.canonical(), id);
      rb.new_ids.emplace_back(r.path.canonical(), id);
      put_string32(rb.dict, r.path.canonical());
    }
    DayBuffers& db = rb.days[day_of(r.timestamp)];
    encode_path(db.paths, id, r);
    ++db.n_paths;
  }
  for (const E2ERecord& r : e2e) {
    std::string root = r.root_rpc.canonical();
    root_entry(next, root);
    DayBuffers& db = buffers[root].days[day_of(r.timestamp)];
    encode_e2e(db.e2e, r);
    ++db.n_e2e;
  }

  std::string id_bytes;
  std::unordered_set<std::string> new_trace_ids;
  std::uint64_t sum = digest_sum_, x = digest_xor_;
  for (const E2ERecord& r : e2e) {
    if (processed_.contains(r.trace_id) || !new_trace_ids.insert(r.trace_id).second) {
      continue;
    }
    put_string16(id_bytes, r.trace_id);
    std::uint64_t h = fnv1a64(r.trace_id);
    sum += h;
    x ^= h;
  }

  // Data files first, manifest last: until the rename, nothing is visible.
  for (auto& [root, rb] : buffers) {
    RootEntry& entry = root_entry(next, root);
    if (!rb.dict.empty()) {
      append_committed(dict_path(dir_, entry), entry.dict_bytes, rb.dict);
      entry.dict_bytes += rb.dict.size();
      entry.dict_entries += rb.new_ids.size();
    }
    for (auto& [day, db] : rb.days) {
      SegmentEntry& seg = entry.segments[day];
      if (seg.generation.empty()) seg.generation = "g0";
      if (!db.paths.empty()) {
        append_committed(segment_path(dir_, entry, day, seg, ".paths"),
                         seg.paths_bytes, db.paths);
      }
      if (!db.e2e.empty()) {
        append_committed(segment_path(dir_, entry, day, seg, ".e2e"),
                         seg.e2e_bytes, db.e2e);
      }
      seg.paths_bytes += db.paths.size();
      seg.e2e_bytes += db.e2e.size();
      seg.path_records += db.n_paths;
      seg.e2e_records += db.n_e2e;
      entry.path_records += db.n_paths;
      entry.e2e_records += db.n_e2e;
    }
  }
  if (!id_bytes.empty()) {
    append_committed(dir_ / kTraceIdsName, next.trace_ids_bytes, id_bytes);
    next.trace_ids_bytes += id_bytes.size();
  }
  next.processed_traces += new_trace_ids.size();
  next.processed_digest = hex64(sum) + hex64(x);
  ++next.commit_seq;
  write_manifest(next);

  manifest_ = std::move(next);
  digest_sum_ = sum;
  digest_xor_ = x;
  for (auto& id : new_trace_ids) processed_.insert(id);
  for (auto& [root, rb] : buffers) {
    auto& known = roots_[root].path_ids;
    for (auto& [path, id] : rb.new_ids) known.emplace(std::move(path), id);
  }
  return {manifest_.commit_seq, paths.size(), e2e.size()};
}

void TraceStore::compact() {
  Manifest next = manifest_;
  ++next.commit_seq;
  const std::string gen = "g" + std::to_string(next.commit_seq);
  std::vector<fs::path> obsolete;
  std::map<std::string, RootState> new_roots;

  for (RootEntry& entry : next.roots) {
    const RootEntry old = entry;
    std::vector<std::string> dict = load_dict(dir_, old);

    struct PathRow {
      Micros ts;
      std::string trace_id;
      std::uint32_t old_id;
      std::uint32_t occurrences;
      double mean;
      bool async;
    };
    struct E2ERow {
      Micros ts;
      std::string trace_id;
      Micros response_time;
    };
    std::map<std::int64_t, std::vector<PathRow>> path_rows;
    std::map<std::int64_t, std::vector<E2ERow>> e2e_rows;
    for (const auto& [day, seg] : old.segments) {
      for_each_path(dir_, old, seg, day, dict,
                    [&, d = day](std::uint32_t id, std::uint32_t occ, double mean,
                                 Micros ts, bool async, std::string_view tid) {
                      path_rows[d].push_back(
                          {ts, std::string(tid), id, occ, mean, async});
                    });
      for_each_e2e(dir_, old, seg, day,
                   [&, d = day](Micros ts, Micros rt, std::string_view tid) {
                     e2e_rows[d].push_back({ts, std::string(tid), rt});
                   });
      obsolete.push_back(segment_path(dir_, old, day, seg, ".paths"));
      obsolete.push_back(segment_path(dir_, old, day, seg, ".e2e"));
    }
    obsolete.push_back(dict_path(dir_, old));

    // Fresh dictionary in lexicographic path order.
    std::vector<std::uint32_t> order(dict.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return dict[a] < dict[b]; });
    std::vector<std::uint32_t> remap(dict.size());
    std::string dict_bytes;
    RootState& state = new_roots[entry.name];
    for (std::uint32_t i = 0; i < order.size(); ++i) {
      remap[order[i]] = i;
      put_string32(dict_bytes, dict[order[i]]);
      state.path_ids.emplace(dict[order[i]], i);
    }
    entry.dict_generation = gen;
    entry.dict_bytes = dict_bytes.size();
    append_committed(dict_path(dir_, entry), 0, dict_bytes);

    for (auto& [day, seg] : entry.segments) {
      seg.generation = gen;
      std::string pbuf, ebuf;
      auto& prows = path_rows[day];
      std::sort(prows.begin(), prows.end(), [&](const PathRow& a, const PathRow& b) {
        return std::tie(a.ts, a.trace_id, dict[a.old_id]) <
               std::tie(b.ts, b.trace_id, dict[b.old_id]);
      });
      for (const PathRow& row : prows) {
        put<std::uint32_t>(pbuf, remap[row.old_id]);
        put<std::uint32_t>(pbuf, row.occurrences);
        put<double>(pbuf, row.mean);
        put<std::int64_t>(pbuf, row.ts);
        put<std::uint8_t>(pbuf, row.async ? 1 : 0);
        put_string16(pbuf, row.trace_id);
      }
      auto& erows = e2e_rows[day];
      std::sort(erows.begin(), erows.end(), [](const E2ERow& a, const E2ERow& b) {
        return std::tie(a.ts, a.trace_id) < std::tie(b.ts, b.trace_id);
      });
      for (const E2ERow& row : erows) {
        put<std::int64_t>(ebuf, row.ts);
        put<std::int64_t>(ebuf, row.response_time);
        put_string16(ebuf, row.trace_id);
      }
      append_committed(segment_path(dir_, entry, day, seg, ".paths"), 0, pbuf);
      append_committed(segment_path(dir_, entry, day, seg, ".e2e"), 0, ebuf);
      seg.paths_bytes = pbuf.size();
      seg.e2e_bytes = ebuf.size();
    }
  }
  write_manifest(next);
  manifest_ = std::move(next);
  roots_ = std::move(new_roots);
  for (const fs::path& p : obsolete) {
    std::error_code ec;
    fs::remove(p, ec);
  }
}

// ---- StoreReader ----

StoreReader StoreReader::open(const fs::path& dir) {
  StoreReader reader;
  reader.dir_ = dir;
  reader.manifest_ = read_manifest(dir);
  return reader;
}

std::vector<std::pair<RpcName, std::uint64_t>> StoreReader::list_roots(
    Micros t0, Micros t1) const {
  std::vector<std::pair<RpcName, std::uint64_t>> out;
  if (t0 > t1) return out;
  const std::int64_t d0 = day_of(t0), d1 = day_of(t1);
  for (const RootEntry& root : manifest_.roots) {
    std::uint64_t count = 0;
    for (auto it = root.segments.lower_bound(d0);
         it != root.segments.end() && it->first <= d1; ++it) {
      const auto& [day, seg] = *it;
      if (seg.e2e_records == 0) continue;
      for_each_e2e(dir_, root, seg, day,
                   [&](Micros ts, Micros, std::string_view) {
                     if (ts >= t0 && ts <= t1) ++count;
                   });
    }
    if (count > 0) out.emplace_back(RpcName::parse(root.name), count);
  }
  return out;
}

std::vector<PathRecord> StoreReader::query_paths(const RpcName& root, Micros t0,
                                                 Micros t1) const {
  std::vector<PathRecord> out;
  const RootEntry* entry = manifest_.find_root(root.canonical());
  if (entry == nullptr || t0 > t1) return out;
  std::vector<std::string> dict = load_dict(dir_, *entry);
  std::vector<PathKey> keys;
  keys.reserve(dict.size());
  for (const std::string& d : dict) keys.push_back(PathKey::parse(d));

  const std::int64_t d0 = day_of(t0), d1 = day_of(t1);
  for (auto it = entry->segments.lower_bound(d0);
       it != entry->segments.end() && it->first <= d1; ++it) {
    const auto& [day, seg] = *it;
    for_each_path(dir_, *entry, seg, day, dict,
                  [&](std::uint32_t id, std::uint32_t occ, double mean, Micros ts,
                      bool async, std::string_view tid) {
                    if (ts < t0 || ts > t1) return;
                    out.push_back(PathRecord{keys[id], std::string(tid), occ,
                                             mean, ts, async});
                  });
  }
  std::sort(out.begin(), out.end(), [](const PathRecord& a, const PathRecord& b) {
    return std::tie(a.timestamp, a.trace_id, a.path.canonical()) <
           std::tie(b.timestamp, b.trace_id, b.path.canonical());
  });
  return out;
}

std::vector<E2ERecord> StoreReader::query_e2e(const RpcName& root, Micros t0,
                                              Micros t1) const {
  std::vector<E2ERecord> out;
  const RootEntry* entry = manifest_.find_root(root.canonical());
  if (entry == nullptr || t0 > t1) return out;
  const std::int64_t d0 = day_of(t0), d1 = day_of(t1);
  for (auto it = entry->segments.lower_bound(d0);
       it != entry->segments.end() && it->first <= d1; ++it) {
    const auto& [day, seg] = *it;
    for_each_e2e(dir_, *entry, seg, day,
                 [&](Micros ts, Micros rt, std::string_view tid) {
                   if (ts < t0 || ts > t1) return;
                   out.push_back(E2ERecord{root, std::string(tid), rt, ts});
                 });
  }
  std::sort(out.begin(), out.end(), [](const E2ERecord& a, const E2ERecord& b) {
    return std::tie(a.timestamp, a.trace_id) < std::tie(b.timestamp, b.trace_id);
  });
  return out;
}

std::string StoreReader::verify() const {
  std::ostringstream problems;
  for (const RootEntry& root : manifest_.roots) {
    std::vector<std::string> dict = load_dict(dir_, root);
    std::uint64_t paths_total = 0, e2e_total = 0;
    for (const auto& [day, seg] : root.segments) {
      std::uint64_t np = 0, ne = 0;
      for_each_path(dir_, root, seg, day, dict,
                    [&](auto&&...) { ++np; });
      for_each_e2e(dir_, root, seg, day, [&](auto&&...) { ++ne; });
      if (np != seg.path_records || ne != seg.e2e_records) {
        problems << root.name << " day " << day << ": manifest says "
                 << seg.path_records << "/" << seg.e2e_records << ", found " << np
                 << "/" << ne << "\n";
      }
      paths_total += np;
      e2e_total += ne;
    }
    if (paths_total != root.path_records || e2e_total != root.e2e_records) {
      problems << root.name << ": root totals disagree with segments\n";
    }
  }
  std::string ids = read_prefix(dir_ / kTraceIdsName, manifest_.trace_ids_bytes);
  Cursor cur(ids);
  std::uint64_t n = 0, sum = 0, x = 0;
  while (!cur.done()) {
    std::uint64_t h = fnv1a64(cur.get_string16());
    sum += h;
    x ^= h;
    ++n;
  }
  if (n != manifest_.processed_traces ||
      (n > 0 && hex64(sum) + hex64(x) != manifest_.processed_digest)) {
    problems << "processed trace id set disagrees with manifest\n";
  }
  return problems.str();
}

std::string inspect_store(const fs::path& dir) {
  Manifest m = read_manifest(dir);
  std::ostringstream out;
  out << "store: " << dir.string() << "\n"
      << "format_version: " << m.format_version << "\n"
      << "commit_seq: " << m.commit_seq << "\n"
      << "processed_traces: " << m.processed_traces << "\n"
      << "processed_digest: " << m.processed_digest << "\n"
      << "roots: " << m.roots.size() << "\n";
  for (const RootEntry& r : m.roots) {
    out << "  " << r.name << "\n"
        << "    dir: " << r.dir << "\n"
        << "    path_records: " << r.path_records << "\n"
        << "    e2e_records: " << r.e2e_records << "\n"
        << "    distinct_paths: " << r.dict_entries << "\n";
    for (const auto& [day, s] : r.segments) {
      out << "    day " << day_label(day) << " (" << s.generation
          << "): paths=" << s.path_records << " e2e=" << s.e2e_records << "\n";
    }
  }
  return out.str();
}

}  // namespace pathlens
