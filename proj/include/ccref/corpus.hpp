#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccref/common.hpp"
#include "ccref/dates.hpp"

namespace ccref {

// Ordinal assurance level EAL1..EAL7, optionally augmented ("+").
struct Eal {
    int level = 0;       // 1..7
    bool plus = false;   // augmentation flag

    // "+" counts half a step on the ordinal scale
    double ordinal() const { return level + (plus ? 0.5 : 0.0); }

    std::string str() const { return "EAL" + std::to_string(level) + (plus ? "+" : ""); }

    static std::optional<Eal> parse(std::string_view s) {
        std::string u = to_upper(trim(s));
        if (u.size() < 4 || u.compare(0, 3, "EAL") != 0) return std::nullopt;
        if (u[3] < '1' || u[3] > '7') return std::nullopt;
        Eal e;
        e.level = u[3] - '0';
        if (u.size() == 4) return e;
        if (u.size() == 5 && u[4] == '+') {
            e.plus = true;
            return e;
        }
        return std::nullopt;
    }

    bool operator==(const Eal&) const = default;
};

enum class CertStatus { Active, Archived, Unknown };

inline std::string to_string(CertStatus s) {
    switch (s) {
        case CertStatus::Active: return "active";
        case CertStatus::Archived: return "archived";
        default: return "unknown";
    }
}

inline std::optional<CertStatus> parse_status(std::string_view s) {
    if (s == "active") return CertStatus::Active;
    if (s == "archived") return CertStatus::Archived;
    if (s == "unknown") return CertStatus::Unknown;
    return std::nullopt;
}

// One certified product: identity, scheme, lifecycle dates, document texts.
struct CertificateRecord {
    std::string cert_id;
    std::string scheme;
    std::string category;
    std::string name;
    std::optional<Eal> eal;
    Date issued;
    std::optional<Date> archived;
    std::vector<Date> maintenance_dates;  // kept sorted ascending
    CertStatus status = CertStatus::Unknown;
    std::optional<std::string> report_text;
    std::optional<std::string> target_text;
};

enum class Supercategory { Smartcard, SmartcardRelated, Other };

inline std::string to_string(Supercategory s) {
    switch (s) {
        case Supercategory::Smartcard: return "Smartcard";
        case Supercategory::SmartcardRelated: return "SmartcardRelated";
        default: return "Other";
    }
}

inline std::optional<Supercategory> parse_supercategory(std::string_view s) {
    if (s == "Smartcard") return Supercategory::Smartcard;
    if (s == "SmartcardRelated") return Supercategory::SmartcardRelated;
    if (s == "Other") return Supercategory::Other;
    return std::nullopt;
}

struct Violation {
    std::string code;
    std::string message;
    bool warning = false;
};

struct RejectedLine {
    long line_number = 0;
    std::string reason;
    std::string raw;
};

struct Corpus {
    std::map<std::string, CertificateRecord> records;  // cert_id -> record
    Date snapshot_date;
    std::map<std::string, Supercategory> category_map;
    std::vector<RejectedLine> rejections;
};

// Checks the per-record invariants. Total: returns descriptors, never throws.
// archived == issued is the CC-portal data error observed in the wild and is
// reported as a warning, not a hard violation.
inline std::vector<Violation> validate_record(const CertificateRecord& r,
                                              std::optional<Date> snapshot = std::nullopt) {
    std::vector<Violation> out;
    if (r.cert_id.empty()) out.push_back({"empty_cert_id", "cert_id must be non-empty", false});
    if (r.archived) {
        if (*r.archived < r.issued)
            out.push_back({"issued_after_archived",
                           "archived " + r.archived->iso() + " precedes issued " + r.issued.iso(),
                           false});
        else if (*r.archived == r.issued)
            out.push_back({"archived_equals_issued",
                           "archival date equals issuance date (likely data error)", true});
    }
    for (const Date& m : r.maintenance_dates)
        if (m < r.issued) {
            out.push_back({"maintenance_before_issued",
                           "maintenance date " + m.iso() + " precedes issued " + r.issued.iso(),
                           false});
            break;
        }
    if (r.status == CertStatus::Archived && !r.archived)
        out.push_back({"status_archived_without_date",
                       "status is archived but no archival date present", true});
    if (snapshot) {
        bool should_be_archived = r.archived && *r.archived <= *snapshot;
        if (should_be_archived && r.status == CertStatus::Active)
            out.push_back({"status_active_despite_archival",
                           "archived " + r.archived->iso() + " is on or before snapshot " +
                               snapshot->iso() + " but status is active",
                           true});
        if (!should_be_archived && r.status == CertStatus::Archived && r.archived)
            out.push_back({"status_archived_before_archival",
                           "status is archived but archival " + r.archived->iso() +
                               " is after snapshot " + snapshot->iso(),
                           true});
    }
    return out;
}

// Lifecycle test on the half-open interval [issued, archived). Records with
// no archival date and unknown status are capped at issued + 5 years; records
// explicitly marked active have no cap.
inline bool is_active(const CertificateRecord& r, Date at) {
    if (at < r.issued) return false;
    if (r.archived) return at < *r.archived;
    if (r.status == CertStatus::Active) return true;
    return at < r.issued.plus_years(5);
}

inline Supercategory supercategory_of(const Corpus& corpus, const std::string& category) {
    auto it = corpus.category_map.find(category);
    return it == corpus.category_map.end() ? Supercategory::Other : it->second;
}

inline Supercategory supercategory_of(const Corpus& corpus, const CertificateRecord& r) {
    return supercategory_of(corpus, r.category);
}

// The three groups of the default mapping ship as data (see data/category_map.tsv);
// this built-in copy keeps the library usable without a config file.
inline std::map<std::string, Supercategory> default_category_map() {
    return {
        {"ICs, Smart Cards and Smart Card-Related Devices and Systems", Supercategory::Smartcard},
        {"Trusted Computing", Supercategory::SmartcardRelated},
        {"Products for Digital Signatures", Supercategory::SmartcardRelated},
        {"Other Devices and Systems", Supercategory::SmartcardRelated},
    };
}

// Tab-separated "category<TAB>supercategory", '#' comments, versioned header.
inline std::map<std::string, Supercategory> load_category_map(const std::string& content) {
    std::map<std::string, Supercategory> out;
    long line_no = 0;
    for (const std::string& raw : split(content, '\n')) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw InputError("category map line " + std::to_string(line_no) +
                             ": expected <category>\\t<supercategory>");
        std::string cat = trim(line.substr(0, tab));
        auto sc = parse_supercategory(trim(line.substr(tab + 1)));
        if (!sc)
            throw InputError("category map line " + std::to_string(line_no) +
                             ": unknown supercategory '" + trim(line.substr(tab + 1)) + "'");
        out[cat] = *sc;
    }
    return out;
}

namespace detail {

inline CertificateRecord record_from_json(const nlohmann::json& j) {
    CertificateRecord r;
    auto require = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) throw DataError(std::string("missing key '") + key + "'");
        return *it;
    };
    r.cert_id = require("cert_id").get<std::string>();
    if (r.cert_id.empty()) throw DataError("cert_id is empty");
    r.scheme = require("scheme").get<std::string>();
    r.category = require("category").get<std::string>();
    r.name = require("name").get<std::string>();
    const auto& eal = require("eal");
    if (!eal.is_null()) {
        auto parsed = Eal::parse(eal.get<std::string>());
        if (!parsed) throw DataError("invalid eal '" + eal.get<std::string>() + "'");
        r.eal = *parsed;
    }
    r.issued = Date::parse_or_throw(require("issued").get<std::string>());
    const auto& arch = require("archived");
    if (!arch.is_null()) r.archived = Date::parse_or_throw(arch.get<std::string>());
    for (const auto& m : require("maintenance_dates"))
        r.maintenance_dates.push_back(Date::parse_or_throw(m.get<std::string>()));
    std::sort(r.maintenance_dates.begin(), r.maintenance_dates.end());
    auto status = parse_status(require("status").get<std::string>());
    if (!status) throw DataError("invalid status '" + require("status").get<std::string>() + "'");
    r.status = *status;
    const auto& rep = require("report_text");
    if (!rep.is_null()) r.report_text = rep.get<std::string>();
    const auto& tgt = require("target_text");
    if (!tgt.is_null()) r.target_text = tgt.get<std::string>();
    return r;
}

inline nlohmann::json record_to_json(const CertificateRecord& r) {
    nlohmann::json j;
    j["cert_id"] = r.cert_id;
    j["scheme"] = r.scheme;
    j["category"] = r.category;
    j["name"] = r.name;
    j["eal"] = r.eal ? nlohmann::json(r.eal->str()) : nlohmann::json(nullptr);
    j["issued"] = r.issued.iso();
    j["archived"] = r.archived ? nlohmann::json(r.archived->iso()) : nlohmann::json(nullptr);
    nlohmann::json maint = nlohmann::json::array();
    for (const Date& m : r.maintenance_dates) maint.push_back(m.iso());
    j["maintenance_dates"] = std::move(maint);
    j["status"] = to_string(r.status);
    j["report_text"] = r.report_text ? nlohmann::json(*r.report_text) : nlohmann::json(nullptr);
    j["target_text"] = r.target_text ? nlohmann::json(*r.target_text) : nlohmann::json(nullptr);
    return j;
}

}  // namespace detail

// Parses a line-delimited corpus. Malformed lines land in corpus.rejections
// with their line number and reason; duplicate cert_ids abort the load.
inline Corpus load_corpus_from_string(const std::string& content, Date snapshot_date,
                                      std::map<std::string, Supercategory> category_map =
                                          default_category_map()) {
    Corpus corpus;
    corpus.snapshot_date = snapshot_date;
    corpus.category_map = std::move(category_map);
    std::map<std::string, long> first_line_of;
    long line_no = 0;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t nl = content.find('\n', pos);
        std::string line =
            nl == std::string::npos ? content.substr(pos) : content.substr(pos, nl - pos);
        pos = nl == std::string::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            corpus.rejections.push_back({line_no, "invalid JSON", line});
            continue;
        }
        CertificateRecord rec;
        try {
            rec = detail::record_from_json(j);
        } catch (const std::exception& e) {
            corpus.rejections.push_back({line_no, e.what(), line});
            continue;
        }
        if (auto dup = first_line_of.find(rec.cert_id); dup != first_line_of.end())
            throw DataError("duplicate cert_id '" + rec.cert_id + "' on lines " +
                            std::to_string(dup->second) + " and " + std::to_string(line_no));
        bool rejected = false;
        for (const Violation& v : validate_record(rec, snapshot_date)) {
            if (!v.warning) {
                corpus.rejections.push_back({line_no, v.code + ": " + v.message, line});
                rejected = true;
                break;
            }
        }
        if (rejected) continue;
        first_line_of[rec.cert_id] = line_no;
        corpus.records.emplace(rec.cert_id, std::move(rec));
    }
    return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, Date snapshot_date,
                          std::map<std::string, Supercategory> category_map =
                              default_category_map()) {
    return load_corpus_from_string(read_file(path), snapshot_date, std::move(category_map));
}

// Records only, sorted by cert_id; load_corpus of the result round-trips.
inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& [id, rec] : corpus.records) out += detail::record_to_json(rec).dump() + "\n";
    return out;
}

inline std::string serialize_rejections(const Corpus& corpus) {
    std::string out;
    for (const RejectedLine& r : corpus.rejections) {
        nlohmann::json j = nlohmann::json::parse(r.raw, nullptr, false);
        if (j.is_discarded() || !j.is_object()) j = nlohmann::json{{"raw", r.raw}};
        j["reason"] = r.reason;
        j["line"] = r.line_number;
        out += j.dump() + "\n";
    }
    return out;
}

// Latest date mentioned anywhere in the corpus; a deterministic default
// snapshot when none is configured.
inline Date max_corpus_date(const Corpus& corpus) {
    Date best;
    bool seen = false;
    for (const auto& [id, r] : corpus.records) {
        auto consider = [&](Date d) {
            if (!seen || best < d) best = d, seen = true;
        };
        consider(r.issued);
        if (r.archived) consider(*r.archived);
        for (const Date& m : r.maintenance_dates) consider(m);
    }
    return best;
}

}  // namespace ccref
