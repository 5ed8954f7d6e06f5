#include "streamrec/ingest.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <string_view>
#include <unordered_set>

namespace streamrec {

std::uint32_t IdMap::intern(std::int64_t raw) {
  auto [it, inserted] = index_.try_emplace(raw, static_cast<std::uint32_t>(raw_.size()));
  if (inserted) raw_.push_back(raw);
  return it->second;
}

void IdMap::dump(std::ostream& out) const {
  for (std::size_t i = 0; i < raw_.size(); ++i) out << i << '\t' << raw_[i] << '\n';
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + delim.size();
  }
  return fields;
}

std::int64_t parse_int(std::string_view field, std::size_t line, const char* name) {
  std::int64_t value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(line, std::string("non-integer ") + name + " field '" + std::string(field) + "'");
  }
  return value;
}

double parse_real(std::string_view field, std::size_t line, const char* name) {
  const std::string copy(field);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || errno == ERANGE || !std::isfinite(value)) {
    throw ParseError(line, std::string("non-numeric ") + name + " field '" + copy + "'");
  }
  return value;
}

struct RawRow {
  std::int64_t user;
  std::int64_t item;
  double rating;
  std::int64_t timestamp;
};

}  // namespace

RatingLog parse_interactions(std::istream& in, const ParseOptions& options) {
  if (options.delimiter.empty()) throw ConfigError("delimiter must be non-empty");
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.skip_header) continue;
    if (trim(line).empty()) continue;
    const auto fields = split(line, options.delimiter);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields (user, item, rating, timestamp), got " +
                                    std::to_string(fields.size()));
    }
    rows.push_back(RawRow{parse_int(fields[0], line_no, "user"), parse_int(fields[1], line_no, "item"),
                          parse_real(fields[2], line_no, "rating"),
                          parse_int(fields[3], line_no, "timestamp")});
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].timestamp < rows[b].timestamp;
  });

  RatingLog log;
  log.events.reserve(rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const RawRow& r = rows[order[k]];
    log.events.push_back(RatedEvent{log.users.intern(r.user), log.items.intern(r.item), k, r.rating,
                                    r.timestamp});
  }
  return log;
}

RatingLog sample_users(const RatingLog& log, std::size_t n_users, std::uint64_t seed) {
  if (n_users >= log.users.size()) return log;
  std::vector<UserId> ids(log.users.size());
  std::iota(ids.begin(), ids.end(), UserId{0});
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::unordered_set<UserId> chosen(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_users));

  std::vector<RatedEvent> kept;
  for (const auto& e : log.events) {
    if (chosen.count(e.user)) kept.push_back(e);
  }
  RatingLog out;
  IdMap users = log.users;
  IdMap items = log.items;
  out.events = filter_min_interactions<RatedEvent>(kept, 0, &users, &items);
  out.users = std::move(users);
  out.items = std::move(items);
  return out;
}

InteractionList binarize(std::span<const RatedEvent> events) {
  InteractionList out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(Interaction{e.user, e.item, e.seq_no, 1});
  return out;
}

std::pair<InteractionList, InteractionList> chronological_split(std::span<const Interaction> list,
                                                                double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(list.size()) * train_fraction));
  return {InteractionList(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n_train)),
          InteractionList(list.begin() + static_cast<std::ptrdiff_t>(n_train), list.end())};
}

void StreamConfig::validate() const {
  if (s_p < 1) throw ConfigError("s_p must be >= 1");
  if (s_r < 1) throw ConfigError("s_r must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

const char* to_string(Workload w) noexcept {
  switch (w) {
    case Workload::kUnderload: return "underload";
    case Workload::kBalanced: return "balanced";
    case Workload::kOverload: return "overload";
  }
  return "?";
}

Dataset load_dataset(std::istream& in, const DatasetOptions& options) {
  RatingLog log = parse_interactions(in, options.parse);
  Dataset ds;
  ds.raw_events = log.events.size();
  if (options.sample_users > 0) log = sample_users(log, options.sample_users, options.sample_seed);
  IdMap users = std::move(log.users);
  IdMap items = std::move(log.items);
  const auto filtered = filter_min_interactions<RatedEvent>(log.events, options.min_interactions, &users, &items);
  ds.interactions = binarize(filtered);
  ds.users = std::move(users);
  ds.items = std::move(items);
  return ds;
}

Dataset load_dataset_file(const std::string& path, const DatasetOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  return load_dataset(in, options);
}

}  // namespace streamrec
