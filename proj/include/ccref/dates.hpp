#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "ccref/common.hpp"

namespace ccref {

// Calendar date, whole-day resolution. All lifecycle arithmetic runs on
// day counts; intervals are half-open [issued, archived).
class Date {
  public:
    Date() : days_{} {}
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::sys_days{std::chrono::year_month_day{
              std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}}) {}

    static std::optional<Date> parse(std::string_view iso) {
        if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
        int y = 0;
        unsigned m = 0, d = 0;
        for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
            if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
        y = (iso[0] - '0') * 1000 + (iso[1] - '0') * 100 + (iso[2] - '0') * 10 + (iso[3] - '0');
        m = static_cast<unsigned>((iso[5] - '0') * 10 + (iso[6] - '0'));
        d = static_cast<unsigned>((iso[8] - '0') * 10 + (iso[9] - '0'));
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
        if (!ymd.ok()) return std::nullopt;
        return Date(std::chrono::sys_days{ymd});
    }

    static Date parse_or_throw(std::string_view iso) {
        auto d = parse(iso);
        if (!d) throw DataError("invalid ISO-8601 date: '" + std::string(iso) + "'");
        return *d;
    }

    std::string iso() const {
        std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return std::string(buf);
    }

    // Calendar-aware year shift; Feb 29 clamps to Feb 28 on non-leap targets.
    Date plus_years(int years) const {
        std::chrono::year_month_day ymd{days_};
        ymd += std::chrono::years{years};
        if (!ymd.ok()) ymd = ymd.year() / ymd.month() / std::chrono::last;
        return Date(std::chrono::sys_days{ymd});
    }

    Date plus_days(long days) const { return Date(days_ + std::chrono::days{days}); }

    friend long operator-(Date a, Date b) { return (a.days_ - b.days_).count(); }
    auto operator<=>(const Date&) const = default;

    std::chrono::sys_days raw() const { return days_; }

  private:
    std::chrono::sys_days days_;
};

inline long days_between(Date from, Date to) { return to - from; }

}  // namespace ccref
