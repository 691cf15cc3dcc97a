#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace stancekit::detail {

struct HttpReply {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body to an absolute http:// or https:// URL. Connection-level
// failures throw TransientBackendError; any HTTP status is returned.
HttpReply http_post_json(const std::string& url, const std::string& body,
                         const Headers& headers, std::chrono::seconds timeout);

inline bool is_transient_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace stancekit::detail
