#include "http_transport.hpp"

#include <httplib.h>

#include "stancekit/error.hpp"
#include "stancekit/llm_gateway.hpp"

namespace stancekit::detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::Config, "endpoint '" + url + "' has no scheme");
  }
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::Config, "unsupported endpoint scheme '" + scheme + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpReply http_post_json(const std::string& url, const std::string& body,
                         const Headers& headers, std::chrono::seconds timeout) {
  SplitUrl target = split_url(url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers hdrs;
  for (const auto& [name, value] : headers) hdrs.emplace(name, value);
  auto result = client.Post(target.path, hdrs, body, "application/json");
  if (!result) {
    throw TransientBackendError("POST " + url + " failed: " +
                                httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

}  // namespace stancekit::detail
