#include "socsim/ingestion.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "socsim/csv.hpp"
#include "socsim/errors.hpp"
#include "socsim/hash.hpp"

namespace socsim {

using nlohmann::json;

namespace {

constexpr std::array kRequiredColumns = {"user_id",   "age",      "gender",
                                         "income_bracket", "education", "partisanship",
                                         "ideology",  "religion", "interests"};

std::optional<int> parse_int(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::vector<std::string> split_interests(const std::string& field) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(field);
  while (std::getline(in, item, ';')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

template <std::size_t N>
const char* pick(const std::array<const char*, N>& options, Rng& rng) {
  return options[rng.below(N)];
}

constexpr std::array<const char*, 2> kGenders = {"Male", "Female"};
constexpr std::array<const char*, 6> kIncomes = {"Under $25k",  "$25k-$50k",   "$50k-$75k",
                                                 "$75k-$100k", "$100k-$150k", "Over $150k"};
constexpr std::array<const char*, 4> kEducation = {"High school or less", "Some college",
                                                   "Bachelor's degree", "Graduate degree"};
constexpr std::array<const char*, 7> kIdeologies = {
    "Extremely liberal", "Liberal",      "Slightly liberal",     "Moderate",
    "Slightly conservative", "Conservative", "Extremely conservative"};
constexpr std::array<const char*, 6> kReligions = {"Protestant", "Catholic", "Jewish",
                                                   "Muslim",     "Other",    "None"};
constexpr std::array<const char*, 20> kInterests = {
    "gardening", "cooking",   "hunting",    "fishing",     "football",
    "basketball", "music",    "movies",     "reading",     "travel",
    "hiking",    "video games", "photography", "cars",     "church activities",
    "volunteering", "fitness", "technology", "art",        "history"};

std::string partisanship_label(int partisanship) {
  switch (partisanship) {
    case -3:
      return "Strong Democrat";
    case -2:
      return "Democrat";
    case -1:
      return "Independent leaning Democrat";
    case 1:
      return "Independent leaning Republican";
    case 2:
      return "Republican";
    case 3:
      return "Strong Republican";
    default:
      return "Independent";
  }
}

}  // namespace

std::vector<Persona> load_personas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open persona file " + path.string());
  std::size_t line = 0;
  const auto header = csv::read_row(in, line);
  if (!header) throw DataError(path.string() + ": empty persona file", 1);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  for (const char* name : kRequiredColumns) {
    if (!col.count(name)) {
      throw DataError(path.string() + ": missing required column '" + name + "'", 1);
    }
  }

  std::vector<Persona> out;
  std::unordered_set<std::string> seen;
  std::size_t row_number = 0;
  while (true) {
    const auto row_line = line + 1;
    auto row = csv::read_row(in, line);
    if (!row) break;
    if (row->size() == 1 && row->front().empty()) continue;
    ++row_number;
    auto field = [&](const char* name) -> std::string {
      const auto it = col.find(name);
      if (it == col.end() || it->second >= row->size()) return {};
      return (*row)[it->second];
    };
    auto row_error = [&](const std::string& msg) {
      return DataError(path.string() + ": row " + std::to_string(row_number) + " (line " +
                           std::to_string(row_line) + "): " + msg,
                       row_number);
    };

    Persona p;
    p.user_id = field("user_id");
    if (p.user_id.empty()) throw row_error("empty user_id");
    if (!seen.insert(p.user_id).second) throw row_error("duplicate user_id '" + p.user_id + "'");
    const auto age = parse_int(field("age"));
    if (!age) throw row_error("age '" + field("age") + "' is not an integer");
    p.age = *age;
    const auto ps = parse_int(field("partisanship"));
    if (!ps) throw row_error("partisanship '" + field("partisanship") + "' is not an integer");
    if (*ps < kMinPartisanship || *ps > kMaxPartisanship) {
      throw row_error("partisanship " + std::to_string(*ps) + " outside [-3, 3]");
    }
    p.partisanship = *ps;
    p.party = party_for(*ps);
    p.gender = field("gender");
    p.income_bracket = field("income_bracket");
    p.education = field("education");
    p.ideology = field("ideology");
    p.religion = field("religion");
    p.interests = split_interests(field("interests"));
    p.biography = field("biography");
    p.occupation = field("occupation");
    out.push_back(std::move(p));
  }
  return out;
}

void write_personas(const std::filesystem::path& path, const std::vector<Persona>& personas) {
  std::ostringstream out;
  csv::write_row(out, {"user_id", "age", "gender", "income_bracket", "education",
                       "partisanship", "ideology", "religion", "interests", "biography",
                       "occupation"});
  for (const auto& p : personas) {
    csv::write_row(out, {p.user_id, std::to_string(p.age), p.gender, p.income_bracket,
                         p.education, std::to_string(p.partisanship), p.ideology, p.religion,
                         join(p.interests, ";"), p.biography, p.occupation});
  }
  write_file_atomic(path, out.str());
}

std::vector<Persona> synthesize_personas(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("synthesize_personas requires n >= 1");
  Rng rng(seed);
  std::vector<Persona> out;
  out.reserve(n);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i + 1);
    id = "u" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, id.size()), '0') + id;
    Persona p = make_persona(std::move(id), static_cast<int>(rng.below(7)) - 3);
    p.age = 18 + static_cast<int>(rng.below(68));
    p.gender = pick(kGenders, rng);
    p.income_bracket = pick(kIncomes, rng);
    p.education = pick(kEducation, rng);
    p.ideology = pick(kIdeologies, rng);
    p.religion = pick(kReligions, rng);
    const auto n_interests = 2 + rng.below(3);
    std::set<std::size_t> chosen;
    while (chosen.size() < n_interests) {
      const auto k = rng.below(kInterests.size());
      if (chosen.insert(k).second) p.interests.emplace_back(kInterests[k]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

PersonaSelection select_personas(const std::vector<Persona>& pool, std::size_t n, Rng& rng) {
  if (pool.empty()) throw ArgumentError("cannot select personas from an empty pool");
  PersonaSelection sel;
  if (pool.size() >= n) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      sel.personas.push_back(pool[idx[i]]);
    }
    return sel;
  }
  sel.with_replacement = true;
  std::map<std::size_t, int> uses;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = rng.below(pool.size());
    Persona p = pool[k];
    if (const int u = ++uses[k]; u > 1) p.user_id += "-" + std::to_string(u);
    sel.personas.push_back(std::move(p));
  }
  return sel;
}

std::string persona_profile(const Persona& p, bool include_biography) {
  std::ostringstream out;
  out << "Handle: @" << p.user_id << '\n'
      << "Age: " << p.age << '\n'
      << "Gender: " << p.gender << '\n'
      << "Income: " << p.income_bracket << '\n'
      << "Education: " << p.education << '\n'
      << "Party identification: " << partisanship_label(p.partisanship) << '\n'
      << "Ideology: " << p.ideology << '\n'
      << "Religion: " << p.religion << '\n'
      << "Interests: " << join(p.interests, ", ");
  if (include_biography) {
    if (!p.occupation.empty()) out << "\nOccupation: " << p.occupation;
    if (!p.biography.empty()) out << "\nBiography: " << p.biography;
  }
  return out.str();
}

NewsCorpus load_news(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open news file " + path.string());
  NewsCorpus corpus;
  corpus.source_path = path.string();
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    auto fail = [&](const std::string& msg) {
      return DataError(path.string() + ": line " + std::to_string(line) + ": " + msg, line);
    };
    const auto doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw fail("not a JSON object");
    if (!doc.contains("headline") || !doc["headline"].is_string() ||
        doc["headline"].get<std::string>().empty()) {
      throw fail("missing headline");
    }
    NewsItem item;
    item.item_id = static_cast<std::int64_t>(line - 1);
    item.headline = doc["headline"].get<std::string>();
    if (doc.contains("category") && doc["category"].is_string()) {
      item.category = doc["category"].get<std::string>();
    }
    if (doc.contains("short_description") && doc["short_description"].is_string()) {
      item.description = doc["short_description"].get<std::string>();
    }
    corpus.items.push_back(std::move(item));
  }
  if (corpus.items.empty()) throw DataError(path.string() + ": empty news file");
  return corpus;
}

NewsCorpus synthesize_news(std::size_t n, std::uint64_t seed) {
  static constexpr std::array<const char*, 8> kCategories = {
      "POLITICS", "BUSINESS", "WORLD NEWS", "SCIENCE", "SPORTS", "ENVIRONMENT", "CRIME", "EDUCATION"};
  static constexpr std::array<const char*, 12> kSubjects = {
      "Congress", "The Supreme Court", "The White House", "State lawmakers",
      "A federal judge", "The Federal Reserve", "City officials", "Researchers",
      "Governors", "Voters", "Tech companies", "Unions"};
  static constexpr std::array<const char*, 12> kEvents = {
      "debate new immigration rules", "weigh in on gun legislation", "clash over tax cuts",
      "announce a climate plan", "face criticism over spending", "push for election reforms",
      "respond to rising prices", "unveil a health care proposal", "fight over school curricula",
      "move to regulate social media", "split on police funding", "back new energy projects"};
  Rng rng(seed);
  NewsCorpus corpus;
  corpus.source_path = "synthetic";
  for (std::size_t i = 0; i < n; ++i) {
    NewsItem item;
    item.item_id = static_cast<std::int64_t>(i);
    item.category = kCategories[rng.below(kCategories.size())];
    item.headline = std::string(kSubjects[rng.below(kSubjects.size())]) + " " +
                    kEvents[rng.below(kEvents.size())];
    item.description = "Synthetic headline " + std::to_string(i) + ".";
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

std::vector<NewsItem> sample_headlines(const NewsCorpus& corpus, std::size_t k, Rng& rng) {
  if (corpus.empty()) throw ArgumentError("cannot sample headlines from an empty corpus");
  if (k == 0) throw ArgumentError("sample_headlines requires k >= 1");
  const auto n = corpus.size();
  k = std::min(k, n);
  std::vector<NewsItem> out;
  out.reserve(k);
  if (2 * k > n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + rng.below(n - i)]);
      out.push_back(corpus.items[idx[i]]);
    }
    return out;
  }
  // Sparse case: rejection keeps the cost independent of corpus size.
  std::vector<std::size_t> chosen;
  while (chosen.size() < k) {
    const auto j = rng.below(n);
    if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) {
      chosen.push_back(j);
      out.push_back(corpus.items[j]);
    }
  }
  return out;
}

PersonaEnricher::PersonaEnricher(LlmClient& llm, EnrichmentOptions options,
                                 const PromptTemplates& templates)
    : llm_(llm), options_(std::move(options)), templates_(templates), cache_(options_.cache_dir) {}

ChatRequest PersonaEnricher::request_for(const Persona& p) const {
  ChatRequest req;
  req.model = options_.model;
  req.temperature = options_.temperature;
  req.max_tokens = options_.max_tokens;
  req.response_format = ResponseFormat::JsonObject;
  req.messages = {{Role::System, render(templates_.enrich_system, {})},
                  {Role::User, render(templates_.enrich_user,
                                      {{"persona", persona_profile(p, false)}})}};
  return req;
}

Persona PersonaEnricher::enrich(const Persona& p) {
  if (!p.biography.empty()) return p;
  const auto key = sha256_hex(json(p).dump());
  Persona out = p;
  if (auto hit = cache_.load(key)) {
    const auto& e = hit->at("enriched");
    out.biography = e.at("biography").get<std::string>();
    out.occupation = e.at("occupation").get<std::string>();
    return out;
  }

  ChatResponse resp;
  try {
    resp = llm_.chat(request_for(p));
  } catch (const Error& e) {
    throw EnrichmentError(p.user_id, e.what());
  }
  auto doc = json::parse(resp.content, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("biography") ||
      !doc["biography"].is_string() || doc["biography"].get<std::string>().empty()) {
    throw EnrichmentError(p.user_id, "model response lacks a biography");
  }
  out.biography = doc["biography"].get<std::string>();
  if (doc.contains("occupation") && doc["occupation"].is_string()) {
    out.occupation = doc["occupation"].get<std::string>();
  }
  if (out.occupation.empty()) throw EnrichmentError(p.user_id, "model response lacks an occupation");
  cache_.store(key, json{{"persona", p},
                         {"enriched", {{"biography", out.biography}, {"occupation", out.occupation}}}});
  return out;
}

Persona enrich_persona(const Persona& p, PersonaEnricher& enricher) { return enricher.enrich(p); }

EnrichmentBatch enrich_all(const std::vector<Persona>& personas, PersonaEnricher& enricher) {
  EnrichmentBatch batch;
  batch.personas = personas;
  std::vector<std::string> errors(personas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < personas.size(); i = next++) {
      try {
        batch.personas[i] = enricher.enrich(personas[i]);
      } catch (const EnrichmentError& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(
      personas.size(), static_cast<std::size_t>(std::max(1, enricher.options().max_in_flight)));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (!e.empty()) batch.failures.push_back(std::move(e));
  }
  return batch;
}

}  // namespace socsim
