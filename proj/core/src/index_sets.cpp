#include "coordsim/index_sets.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

namespace coordsim::polar {

CapacityError::CapacityError(std::size_t a2, std::size_t a3, std::size_t b3)
    : std::runtime_error("insufficient chaining capacity: |A2| = " + std::to_string(a2) + " < |A3| + |B3| = " +
                         std::to_string(a3) + " + " + std::to_string(b3)),
      a2_(a2),
      a3_(a3),
      b3_(b3) {}

namespace {

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool disjoint(const IndexSet& a, const IndexSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    *i < *j ? ++i : ++j;
  }
  return true;
}

bool subset(const IndexSet& a, const IndexSet& of) { return std::includes(of.begin(), of.end(), a.begin(), a.end()); }

std::string check_partition(const char* name, std::initializer_list<const IndexSet*> parts, std::size_t n) {
  std::vector<int> hits(n, 0);
  for (const IndexSet* p : parts) {
    if (!std::is_sorted(p->begin(), p->end())) return std::string(name) + " sets are not sorted";
    for (auto j : *p) {
      if (j >= n) return std::string(name) + " index out of range";
      ++hits[j];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (hits[j] != 1) return std::string(name) + " sets do not partition the indices at " + std::to_string(j);
  return {};
}

}  // namespace

IndexSet PolarIndexSets::b1_private() const { return set_difference(b1, bp1); }

PolarIndexSets build_index_sets(const PolarizedEntropyProfile& profile, const PolarParams& params) {
  params.validate();
  if (profile.n != params.n) throw PolarError("profile block length differs from parameters");
  const std::size_t n = params.n;
  const double delta = params.delta();
  const auto& hs = profile.family[kSGivenPast].mean;
  const auto& hsy = profile.family[kSGivenPastY].mean;
  const auto& hzxu = profile.family[kZGivenPastXU].mean;
  const auto& hzx = profile.family[kZGivenPastX].mean;
  const auto& hzall = profile.family[kZGivenPastUXYV].mean;

  PolarIndexSets s;
  s.n = n;
  for (std::uint32_t j = 0; j < n; ++j) {
    const bool v_x = hs[j] > 1.0 - delta;
    const bool h_x = hs[j] > delta;
    const bool h_xy = hsy[j] > delta;
    if (h_xy && !h_x) ++s.nesting_violations;
    if (v_x && h_xy) s.a1.push_back(j);
    else if (v_x) s.a2.push_back(j);
    else if (h_xy) s.a3.push_back(j);
    else s.a4.push_back(j);

    const bool v_wxu = hzxu[j] > 1.0 - delta;
    const bool h_wx = hzx[j] > delta;
    const bool v_wall = hzall[j] > 1.0 - delta;
    if (v_wxu && !h_wx) ++s.b2_reassigned;
    const bool in_b1 = v_wxu;  // B2 is folded into B1
    if (in_b1) s.b1.push_back(j);
    else if (h_wx) s.b3.push_back(j);
    else s.b4.push_back(j);
    if (v_wall) {
      if (in_b1) s.bp1.push_back(j);
      else ++s.bp1_violations;
    }
  }

  if (s.a2.size() < s.a3.size() + s.b3.size()) throw CapacityError(s.a2.size(), s.a3.size(), s.b3.size());
  const auto a3_end = s.a2.begin() + static_cast<std::ptrdiff_t>(s.a3.size());
  const auto b3_end = a3_end + static_cast<std::ptrdiff_t>(s.b3.size());
  s.ap3.assign(s.a2.begin(), a3_end);
  s.bp3.assign(a3_end, b3_end);
  s.ap2.assign(b3_end, s.a2.end());
  return s;
}

std::string validate_sets(const PolarIndexSets& s) {
  if (auto e = check_partition("A", {&s.a1, &s.a2, &s.a3, &s.a4}, s.n); !e.empty()) return e;
  if (auto e = check_partition("B", {&s.b1, &s.b2, &s.b3, &s.b4}, s.n); !e.empty()) return e;
  if (!s.b2.empty()) return "B2 is not empty";
  if (!subset(s.bp1, s.b1)) return "B'1 is not a subset of B1";
  if (s.ap3.size() != s.a3.size() || s.bp3.size() != s.b3.size()) return "chained subsets have the wrong size";
  if (!disjoint(s.ap3, s.bp3)) return "A'3 and B'3 overlap";
  if (!subset(s.ap3, s.a2) || !subset(s.bp3, s.a2)) return "chained subsets are not inside A2";
  IndexSet rest = set_difference(set_difference(s.a2, s.ap3), s.bp3);
  if (rest != s.ap2) return "A'2 is not the remainder of A2";
  return {};
}

RateReport rate_report(const PolarIndexSets& s, std::size_t k) {
  if (k < 1) throw PolarError("rate report needs k >= 1");
  const double K = static_cast<double>(k);
  const double n = static_cast<double>(s.n);
  const double a1 = static_cast<double>(s.a1.size()), a2 = static_cast<double>(s.a2.size());
  const double a3 = static_cast<double>(s.a3.size()), b1 = static_cast<double>(s.b1.size());
  const double b3 = static_cast<double>(s.b3.size()), bp1 = static_cast<double>(s.bp1.size());
  RateReport r;
  r.k = k;
  r.common_randomness = (K * a1 + (K - 1) * a3 + K * b1 + (K - 1) * b3 - (K - 1) * bp1) / (K * n);
  r.side_channel = (a3 + b3) / (K * n);
  // Block 1 draws all of A2 locally, later blocks only A'2.
  r.local_randomness = (a2 + (K - 1) * static_cast<double>(s.ap2.size())) / (K * n);
  r.common_randomness_limit = (a1 + a3 + b1 + b3 - bp1) / n;
  return r;
}

nlohmann::json to_json(const PolarIndexSets& s) {
  return {{"n", s.n},
          {"index_base", 0},
          {"A1", s.a1},
          {"A2", s.a2},
          {"A3", s.a3},
          {"A4", s.a4},
          {"B1", s.b1},
          {"B2", s.b2},
          {"B3", s.b3},
          {"B4", s.b4},
          {"Bp1", s.bp1},
          {"Ap2", s.ap2},
          {"Ap3", s.ap3},
          {"Bp3", s.bp3},
          {"b2_reassigned", s.b2_reassigned},
          {"bp1_violations", s.bp1_violations},
          {"nesting_violations", s.nesting_violations}};
}

nlohmann::json to_json(const RateReport& r) {
  return {{"k", r.k},
          {"common_randomness", r.common_randomness},
          {"side_channel", r.side_channel},
          {"local_randomness", r.local_randomness},
          {"common_randomness_limit", r.common_randomness_limit}};
}

Construction construct(const SourceModel& m, const PolarParams& params, std::uint64_t seed) {
  Construction c;
  c.profile = estimate_profile(m, params, seed);
  c.sets = build_index_sets(c.profile, params);
  return c;
}

// ------------------------------------------------------------------ cache

std::uint64_t model_fingerprint(const SourceModel& m) {
  const std::string text = to_json(m).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', 'X'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void set(const IndexSet& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (auto j : s) u32(j);
  }
  void doubles(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  IndexSet set(std::size_t n) {
    const std::uint32_t count = u32();
    if (count > n) throw PolarError("sets cache: set larger than the block");
    IndexSet s(count);
    for (auto& j : s) {
      j = u32();
      if (j >= n) throw PolarError("sets cache: index out of range");
    }
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  bool magic() {
    if (buf_.size() < 4) return false;
    pos_ = 4;
    return std::equal(kMagic, kMagic + 4, buf_.begin());
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > buf_.size()) throw PolarError("sets cache: truncated file");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_sets_cache(const std::filesystem::path& path, const CacheKey& key, const Construction& c) {
  const auto& s = c.sets;
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCacheVersion);
  w.u64(key.n);
  w.f64(key.beta);
  w.u64(key.mc_samples);
  w.u64(key.seed);
  w.u64(key.model_hash);
  for (const IndexSet* set : {&s.a1, &s.a2, &s.a3, &s.a4, &s.b1, &s.b2, &s.b3, &s.b4, &s.bp1, &s.ap2, &s.ap3, &s.bp3})
    w.set(*set);
  w.u64(s.b2_reassigned);
  w.u64(s.bp1_violations);
  w.u64(s.nesting_violations);
  w.u64(c.profile.samples);
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    w.doubles(c.profile.family[f].mean);
    w.doubles(c.profile.family[f].std_error);
    w.f64(c.profile.total_std_error[f]);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PolarError("cannot write sets cache " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw PolarError("failed writing sets cache " + path.string());
}

std::optional<Construction> read_sets_cache(const std::filesystem::path& path, const CacheKey& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  if (!r.magic()) throw PolarError("sets cache: bad magic in " + path.string());
  if (r.u32() != kCacheVersion) return std::nullopt;
  CacheKey stored;
  stored.n = r.u64();
  stored.beta = r.f64();
  stored.mc_samples = r.u64();
  stored.seed = r.u64();
  stored.model_hash = r.u64();
  if (!(stored == key)) return std::nullopt;

  Construction c;
  auto& s = c.sets;
  const std::size_t n = key.n;
  s.n = n;
  for (IndexSet* set : {&s.a1, &s.a2, &s.a3, &s.a4, &s.b1, &s.b2, &s.b3, &s.b4, &s.bp1, &s.ap2, &s.ap3, &s.bp3})
    *set = r.set(n);
  s.b2_reassigned = r.u64();
  s.bp1_violations = r.u64();
  s.nesting_violations = r.u64();
  c.profile.n = n;
  c.profile.samples = r.u64();
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    c.profile.family[f].mean = r.doubles(n);
    c.profile.family[f].std_error = r.doubles(n);
    c.profile.total_std_error[f] = r.f64();
  }
  if (!r.done()) throw PolarError("sets cache: trailing bytes");
  if (auto e = validate_sets(s); !e.empty()) throw PolarError("sets cache: " + e);
  return c;
}

}  // namespace coordsim::polar
