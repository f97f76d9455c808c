#pragma once
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrl/geometry.hpp"
#include "rrl/rng.hpp"

namespace rrl {

// One environment transition. a is the executed action; a_task is what
// the task policy proposed. They coincide unless recovery was engaged.
// next_a is the action executed from sn when the episode continued, and
// (0, 0) on terminal or trailing rows; it backs up risk targets through
// the data-generating policy when no learned successor policy exists yet.
struct Transition {
  Vec2 s{0.0, 0.0};
  Vec2 a{0.0, 0.0};
  Vec2 a_task{0.0, 0.0};
  Vec2 sn{0.0, 0.0};
  Vec2 next_a{0.0, 0.0};
  double r = 0.0;
  double c = 0.0;  // constraint cost of the arrival state, 0 or 1
  bool done = false;
};

// Rebuilds next_a links over rows laid out in collection order: each
// non-terminal row inherits its successor's executed action.
inline void link_successor_actions(std::vector<Transition>& rows) {
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].done && i + 1 < rows.size())
      rows[i].next_a = rows[i + 1].a;
    else
      rows[i].next_a = Vec2{0.0, 0.0};
  }
}

// Bounded FIFO ring with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 1000000) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
  }

  void push(const Transition& t) {
    if (data_.size() < cap_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % cap_;
    }
    ++inserted_;
  }

  size_t size() const { return data_.size(); }
  size_t capacity() const { return cap_; }
  uint64_t inserted() const { return inserted_; }
  bool empty() const { return data_.empty(); }

  const Transition& at(size_t i) const { return data_[i]; }

  // Oldest-first view, independent of ring layout.
  std::vector<Transition> ordered() const {
    std::vector<Transition> out;
    out.reserve(data_.size());
    if (data_.size() < cap_) {
      out = data_;
    } else {
      for (size_t k = 0; k < cap_; ++k) out.push_back(data_[(head_ + k) % cap_]);
    }
    return out;
  }

  std::vector<const Transition*> sample(size_t batch, Rng& rng) const {
    if (data_.empty()) throw std::runtime_error("replay: sample from empty buffer");
    std::vector<const Transition*> out(batch);
    for (size_t i = 0; i < batch; ++i) out[i] = &data_[rng.uniform_int(data_.size())];
    return out;
  }

  void assign(const std::vector<Transition>& rows) {
    data_.clear();
    head_ = 0;
    inserted_ = 0;
    for (const auto& t : rows) push(t);
  }

 private:
  size_t cap_;
  size_t head_ = 0;  // next eviction slot once full
  uint64_t inserted_ = 0;
  std::vector<Transition> data_;
};

// An offline dataset plus the provenance recorded in its sidecar file.
struct Dataset {
  std::vector<Transition> rows;
  std::string env_name;
  uint64_t seed = 0;
  size_t violations = 0;

  size_t count_violations() const {
    size_t v = 0;
    for (const auto& t : rows) v += t.c > 0.5 ? 1 : 0;
    return v;
  }
};

inline constexpr const char* kDatasetHeader = "s0,s1,a0,a1,sn0,sn1,c,done";

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::fputs(kDatasetHeader, f);
  std::fputc('\n', f);
  for (const auto& t : d.rows) {
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", t.s[0], t.s[1], t.a[0], t.a[1],
                 t.sn[0], t.sn[1], t.c > 0.5 ? 1 : 0, t.done ? 1 : 0);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("cannot close: " + path);

  std::FILE* m = std::fopen((path + ".meta.json").c_str(), "w");
  if (!m) throw std::runtime_error("cannot open for write: " + path + ".meta.json");
  std::fprintf(m,
               "{\n  \"env\": \"%s\",\n  \"seed\": %" PRIu64
               ",\n  \"count\": %zu,\n  \"violations\": %zu\n}\n",
               d.env_name.c_str(), d.seed, d.rows.size(), d.count_violations());
  if (std::fclose(m) != 0) throw std::runtime_error("cannot close sidecar for: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw std::runtime_error("dataset file missing: " + path);
  Dataset d;
  char line[512];
  long line_no = 0;
  try {
    if (!std::fgets(line, sizeof(line), f)) throw std::runtime_error("empty dataset file: " + path);
    ++line_no;
    line[strcspn(line, "\r\n")] = 0;
    if (std::string(line) != kDatasetHeader)
      throw std::runtime_error("bad dataset header in " + path);
    while (std::fgets(line, sizeof(line), f)) {
      ++line_no;
      line[strcspn(line, "\r\n")] = 0;
      if (line[0] == 0) continue;
      Transition t;
      double c = 0, done = 0;
      char tail = 0;
      const int n = std::sscanf(line, "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf%c", &t.s[0], &t.s[1],
                                &t.a[0], &t.a[1], &t.sn[0], &t.sn[1], &c, &done, &tail);
      if (n != 8)
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + " of " + path);
      if ((c != 0.0 && c != 1.0) || (done != 0.0 && done != 1.0))
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + " of " + path +
                                 ": c and done must be 0 or 1");
      t.c = c;
      t.done = done != 0.0;
      t.a_task = t.a;
      t.r = 0.0;
      d.rows.push_back(t);
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  link_successor_actions(d.rows);
  d.violations = d.count_violations();

  // sidecar is optional on load; absence leaves provenance fields empty
  std::FILE* m = std::fopen((path + ".meta.json").c_str(), "r");
  if (m) {
    char buf[1024];
    const size_t n = std::fread(buf, 1, sizeof(buf) - 1, m);
    buf[n] = 0;
    std::fclose(m);
    const char* e = std::strstr(buf, "\"env\": \"");
    if (e) {
      e += 8;
      const char* end = std::strchr(e, '"');
      if (end) d.env_name.assign(e, end);
    }
    const char* s = std::strstr(buf, "\"seed\": ");
    if (s) d.seed = std::strtoull(s + 8, nullptr, 10);
  }
  return d;
}

}  // namespace rrl
