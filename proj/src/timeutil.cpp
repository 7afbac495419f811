#include "astgin/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "astgin/error.hpp"

namespace astgin {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

bool try_parse_timestamp(std::string_view text, Minutes& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.size() != 16 && text.size() != 19) return false;
  if (text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') || text[13] != ':')
    return false;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d) ||
      !read_int(text, 11, 2, h) || !read_int(text, 14, 2, mi))
    return false;
  if (text.size() == 19) {
    int sec = 0;
    if (text[16] != ':' || !read_int(text, 17, 2, sec) || sec > 59) return false;
  }
  if (h > 23 || mi > 59) return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  out = static_cast<Minutes>(days) * 1440 + h * 60 + mi;
  return true;
}

Minutes parse_timestamp(std::string_view text) {
  Minutes t = 0;
  if (!try_parse_timestamp(text, t))
    throw ValidationError("malformed timestamp '" + std::string(text) + "' (expected YYYY-MM-DD HH:MM)");
  return t;
}

std::string format_timestamp(Minutes t) {
  Minutes days = t / 1440;
  Minutes rem = t % 1440;
  if (rem < 0) {
    rem += 1440;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return buf;
}

}  // namespace astgin
