#include <algorithm>
#include <fstream>
#include <sstream>

#include "coffeescan/forge.hpp"
#include "coffeescan/protolab.hpp"

namespace coffeescan::forge {

namespace fs = std::filesystem;
using protolab::Rng;

const char* to_string(Obfuscation o) {
  switch (o) {
    case Obfuscation::Plain: return "plain";
    case Obfuscation::Renamed: return "renamed";
    case Obfuscation::Detached: return "detached";
    case Obfuscation::Ternary: return "ternary";
  }
  return "?";
}

std::optional<Obfuscation> parse_obfuscation(std::string_view name) {
  for (Obfuscation o : kAllObfuscations) {
    if (name == to_string(o)) return o;
  }
  return std::nullopt;
}

std::vector<PlantRequest> parse_plants(std::string_view spec) {
  std::vector<PlantRequest> out;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t end = spec.find(',', pos);
    if (end == std::string_view::npos) end = spec.size();
    std::string_view item = spec.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    PlantRequest req{};
    if (auto at = item.find('@'); at != std::string_view::npos) {
      req.obfuscation = parse_obfuscation(item.substr(at + 1));
      if (!req.obfuscation) throw std::invalid_argument("unknown obfuscation in '" + std::string(item) + "'");
      item = item.substr(0, at);
    }
    std::string_view name = item;
    if (auto colon = item.find(':'); colon != std::string_view::npos) {
      name = item.substr(0, colon);
      const std::string count(item.substr(colon + 1));
      if (count.empty() || !std::all_of(count.begin(), count.end(), ::isdigit)) {
        throw std::invalid_argument("bad count in '" + std::string(item) + "'");
      }
      req.count = std::stoul(count);
    }
    auto kind = detectors::parse_detector(name);
    if (!kind) throw std::invalid_argument("unknown detector '" + std::string(name) + "'");
    req.detector = *kind;
    out.push_back(req);
  }
  return out;
}

namespace {

// ---- text building ------------------------------------------------------------------

class Lines {
 public:
  Lines& operator<<(std::string line) {
    lines_.push_back(std::move(line));
    return *this;
  }
  /// Line number the next line will get.
  std::uint32_t next() const { return static_cast<std::uint32_t>(lines_.size() + 1); }
  std::string str() const {
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

 private:
  std::vector<std::string> lines_;
};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

bool coin(Rng& rng) { return rng.uniform(0, 1) == 1; }

std::string q(const std::string& s) { return "\"" + s + "\""; }

const std::vector<std::string> kHosts = {"api.shopmall.cn", "m.tinyhub.com", "svc.campus-go.net",
                                         "wxapi.fooddeli.cn", "gw.readbook.io", "api.petcare.com"};
const std::vector<std::string> kPages = {"index", "detail", "cart", "profile", "order", "search",
                                         "list", "setting", "coupon", "message", "home", "share"};
const std::vector<std::string> kFields = {"items", "title", "count", "price", "loading", "tab", "page", "cursor"};
const std::vector<std::string> kGetterUrls = {"/wxapp/getNewSessionKey", "/admin/index.php?m=get_session_key",
                                              "/wxapp/Getsessionkey", "/bale/pay.php?do=getSession",
                                              "/mini_shop_h5/Setting/get_session_key",
                                              "/login/getJcbWxSessionKey", "/entry/wxapp/GetSessionkey",
                                              "/weapp/member/get_session_key.json"};
const std::vector<std::string> kDuplicationUrls = {"/auth/jscode2session", "/sns/jscode2session",
                                                   "/api/code2session"};

std::string uuid(Rng& rng) {
  std::string h = rng.hex(32);
  std::transform(h.begin(), h.end(), h.begin(), ::toupper);
  return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" + h.substr(16, 4) + "-" + h.substr(20);
}

// ---- clean code ---------------------------------------------------------------------

struct Context {
  Rng& rng;
  std::string appid;
  std::string host;
  std::set<DetectorKind> planted;
};

std::string app_js(Context& c) {
  Lines l;
  l << "var config = require(\"./utils/config.js\");";
  l << "App({";
  l << "  globalData: { userInfo: null, token: \"\", version: " + q(c.rng.hex(40)) + " },";
  l << "  onLaunch: function (options) {";
  l << "    var that = this;";
  l << "    wx.login({";
  l << "      success: function (res) {";
  l << "        wx.request({";
  l << "          url: config.base + \"/api/user/login\",";
  l << "          method: \"POST\",";
  l << "          data: { code: res.code },";
  l << "          success: function (r) {";
  l << "            that.globalData.token = r.data.token;";
  l << "          }";
  l << "        });";
  l << "      }";
  l << "    });";
  l << "  }";
  l << "});";
  return l.str();
}

std::string config_js(Context& c) {
  Lines l;
  l << "var config = {";
  l << "  base: " + q("https://" + c.host) + ",";
  l << "  cdn: " + q("https://cdn." + c.host.substr(c.host.find('.') + 1) + "/static/") + ",";
  l << "  build: " + q(c.rng.hex(40)) + ",";
  l << "  digest: " + q(c.rng.hex(64)) + ",";
  l << "  trace: " + q(uuid(c.rng)) + ",";
  l << "  timeout: " + std::to_string(c.rng.uniform(3, 30) * 1000);
  l << "};";
  l << "module.exports = config;";
  return l.str();
}

std::string util_js(Context& c) {
  Lines l;
  l << "function formatNumber(n) {";
  l << "  n = n + \"\";";
  l << "  return n.length > 1 ? n : \"0\" + n;";
  l << "}";
  l << "function formatPrice(v) {";
  l << "  if (v === null) {";
  l << "    return \"--\";";
  l << "  }";
  l << "  return \"CNY \" + (v / 100).toFixed(2);";
  l << "}";
  l << "function showError(msg) {";
  l << "  wx.showToast({ title: msg, icon: \"none\", duration: " + std::to_string(c.rng.uniform(1, 3) * 1000) + " });";
  l << "}";
  l << "module.exports = { formatNumber: formatNumber, formatPrice: formatPrice, showError: showError };";
  return l.str();
}

// A file outside the parser's subset; only the raw-text scan sees it.
std::string vendor_js(Context& c) {
  Lines l;
  l << "(function (root) {";
  l << "  var table = [];";
  l << "  for (var i = 0; i < 256; i++) {";
  l << "    table.push(i ^ " + std::to_string(c.rng.uniform(1, 255)) + ");";
  l << "  }";
  l << "  root.checksum = function (s) { var h = 0; for (var j = 0; j < s.length; j++) { h = (h + table[s.charCodeAt(j) & 255]) | 0; } return h; };";
  l << "})(this);";
  return l.str();
}

// Safe versions of every pattern a detector looks at.
std::string clean_page(Context& c, const std::string& name) {
  Lines l;
  const std::string field = pick(c.rng, kFields);
  l << "var util = require(\"../../utils/util.js\");";
  l << "var config = require(\"../../utils/config.js\");";
  l << "Page({";
  l << "  data: { " + field + ": [], loading: false },";
  l << "  onLoad: function (query) {";
  l << "    var that = this;";
  l << "    that.setData({ loading: true });";
  l << "    wx.request({";
  l << "      url: config.base + \"/api/" + name + "/list\",";
  l << "      data: { page: 1, size: " + std::to_string(c.rng.uniform(5, 40)) + " },";
  l << "      success: function (res) {";
  l << "        that.setData({ " + field + ": res.data.list, loading: false });";
  l << "      },";
  l << "      fail: function () {";
  l << "        util.showError(\"network error\");";
  l << "      }";
  l << "    });";
  l << "  },";
  if (!c.planted.count(DetectorKind::MissingCrossAppCheck) && coin(c.rng)) {
    if (coin(c.rng)) {
      l << "  onShow: function (t) {";
      l << "    if (t.scene && 1038 == t.scene && " + q(c.appid) +
               " == (t.referrerInfo && t.referrerInfo.appId ? t.referrerInfo.appId : \"\")) {";
      l << "      this.setData({ extra: t.referrerInfo.extraData });";
      l << "    }";
      l << "  },";
    } else {
      l << "  onShow: function (opts) {";
      l << "    var ref = opts.referrerInfo;";
      l << "    if (ref && ref.appId === " + q(c.appid) + ") {";
      l << "      this.setData({ extra: ref.extraData });";
      l << "    }";
      l << "  },";
    }
  }
  if (coin(c.rng)) {
    l << "  getPhoneNumber: function (e) {";
    l << "    wx.request({";
    l << "      url: config.base + \"/api/user/phone\",";
    l << "      method: \"POST\",";
    l << "      data: { encryptedData: e.detail.encryptedData, iv: e.detail.iv }";
    l << "    });";
    l << "  },";
  }
  if (coin(c.rng)) {
    l << "  syncSteps: function () {";
    l << "    wx.getWeRunData({";
    l << "      success: function (res) {";
    l << "        wx.request({ url: config.base + \"/api/run/sync\", method: \"POST\", data: res });";
    l << "      }";
    l << "    });";
    l << "  },";
  }
  if (coin(c.rng)) {
    l << "  setupBle: function (server) {";
    l << "    server.addService({";
    l << "      uuid: " + q(uuid(c.rng)) + ",";
    l << "      characteristics: [],";
    l << "      readEncryptionRequired: true,";
    l << "      writeEncryptionRequired: " + std::string(coin(c.rng) ? "true" : "!0");
    l << "    });";
    l << "  },";
  }
  if (coin(c.rng)) {
    if (c.planted.count(DetectorKind::MissingPrivateShareCheck)) {
      l << "  onReady: function () {";
      l << "    wx.updateShareMenu({ withShareTicket: true });";
      l << "  },";
    } else {
      l << "  onReady: function () {";
      l << "    wx.updateShareMenu({ withShareTicket: true, isPrivateMessage: true, activityId: " +
               q(c.rng.hex(12)) + " });";
      l << "  },";
      l << "  onShareTicket: function (ticket) {";
      l << "    wx.authPrivateMessage({";
      l << "      shareTicket: ticket,";
      l << "      success: function (res) {";
      l << "        wx.request({ url: config.base + \"/api/share/verify\", data: res });";
      l << "      }";
      l << "    });";
      l << "  },";
    }
  }
  l << "  onTap: function (e) {";
  l << "    wx.navigateTo({ url: \"/pages/" + pick(c.rng, kPages) + "/index?id=\" + e.currentTarget.dataset.id });";
  l << "  }";
  l << "});";
  return l.str();
}

// ---- plants -------------------------------------------------------------------------

struct PlantCode {
  std::string text;
  std::uint32_t line = 0;
};

PlantCode plant_ble(Context& c, Obfuscation o) {
  Lines l;
  PlantCode p;
  const std::string id = uuid(c.rng);
  switch (o) {
    case Obfuscation::Plain:
      l << "function startPeripheral(server) {";
      p.line = l.next();
      l << "  server.addService({";
      l << "    uuid: " + q(id) + ",";
      l << "    characteristics: [],";
      l << "    readEncryptionRequired: false,";
      l << "    writeEncryptionRequired: false";
      l << "  });";
      l << "}";
      l << "module.exports = { startPeripheral: startPeripheral };";
      break;
    case Obfuscation::Renamed:
      l << "function n(e, r) {";
      l << "  var t = { uuid: " + q(id) + ", characteristics: r, readEncryptionRequired: !1, writeEncryptionRequired: !1 };";
      p.line = l.next();
      l << "  e.addService(t);";
      l << "}";
      l << "module.exports = { a: n };";
      break;
    case Obfuscation::Detached:
      l << "var b = require(\"../../utils/util.js\");";
      l << "function addService(server, n) {";
      l << "  var uuid = " + q(id) + ";";
      l << "  var ch = { uuid: " + q(uuid(c.rng)) + ", properties: { write: true, read: true } };";
      l << "  b[\"showError\"](\"service ready\");";
      l << "  if (n > 0) {";
      l << "    ch.value = n;";
      l << "  }";
      l << "  var bleservice = { uuid: uuid, characteristics: [ch] };";
      l << "  bleservice.readEncryptionRequired = false;";
      l << "  bleservice.writeEncryptionRequired = false;";
      p.line = l.next();
      l << "  server.addService(bleservice);";
      l << "}";
      l << "module.exports = { addService: addService };";
      break;
    case Obfuscation::Ternary:
      l << "function setup(server) {";
      l << "  var secure = !0 ? false : true;";
      l << "  var svc = { uuid: " + q(id) + ", readEncryptionRequired: secure };";
      l << "  svc.writeEncryptionRequired = secure;";
      p.line = l.next();
      l << "  server.addService(svc);";
      l << "}";
      l << "module.exports = { setup: setup };";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_cross_app(Context& c, Obfuscation o) {
  Lines l;
  PlantCode p;
  switch (o) {
    case Obfuscation::Plain:
      l << "Page({";
      l << "  onShow: function (options) {";
      p.line = l.next();
      l << "    var data = options.referrerInfo.extraData;";
      l << "    this.setData({ payload: data });";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Renamed:
      l << "Page({";
      l << "  onShow: function (t) {";
      l << "    var r = t.referrerInfo;";
      l << "    if (r) {";
      p.line = l.next();
      l << "      this.setData({ p: r.extraData, s: t.scene });";
      l << "    }";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Detached:
      l << "Page({";
      l << "  onShow: function (t) {";
      l << "    var info = t.referrerInfo;";
      l << "    var that = this;";
      l << "    that.setData({ scene: t.scene });";
      l << "    if (t.scene == 1037) {";
      p.line = l.next();
      l << "      that.setData({ coupon: info.extraData.coupon });";
      l << "    }";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Ternary:
      l << "Page({";
      l << "  onShow: function (t) {";
      p.line = l.next();
      l << "    var d = t.referrerInfo ? t.referrerInfo.extraData : {};";
      l << "    this.setData({ order: d.orderId });";
      l << "  }";
      l << "});";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_private_share(Context& c, Obfuscation o) {
  Lines l;
  PlantCode p;
  const std::string activity = q(c.rng.hex(12));
  switch (o) {
    case Obfuscation::Plain:
      l << "Page({";
      l << "  onReady: function () {";
      p.line = l.next();
      l << "    wx.updateShareMenu({ withShareTicket: true, isPrivateMessage: true, activityId: " + activity + " });";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Renamed:
      l << "var w = wx;";
      l << "Page({";
      l << "  onReady: function () {";
      p.line = l.next();
      l << "    w.updateShareMenu({ withShareTicket: !0, isPrivateMessage: !0, activityId: " + activity + " });";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Detached:
      l << "function share() {";
      l << "  var opts = { withShareTicket: true, activityId: " + activity + " };";
      l << "  opts.isPrivateMessage = true;";
      p.line = l.next();
      l << "  wx.updateShareMenu(opts);";
      l << "}";
      l << "module.exports = { share: share };";
      break;
    case Obfuscation::Ternary:
      l << "Page({";
      l << "  onReady: function () {";
      l << "    var priv = !0 ? true : false;";
      p.line = l.next();
      l << "    wx.updateShareMenu({ withShareTicket: true, isPrivateMessage: priv });";
      l << "  }";
      l << "});";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_secret_string(Context& c, Obfuscation o, const std::string& secret) {
  Lines l;
  PlantCode p;
  switch (o) {
    case Obfuscation::Plain:
      l << "var wxConfig = {";
      l << "  appid: " + q(c.appid) + ",";
      p.line = l.next();
      l << "  secret: " + q(secret);
      l << "};";
      l << "module.exports = wxConfig;";
      break;
    case Obfuscation::Renamed:
      p.line = l.next();
      l << "var c = { a: " + q(c.appid) + ", s: " + q(secret) + " };";
      l << "module.exports = c;";
      break;
    case Obfuscation::Detached:
      l << "var keys = {};";
      l << "keys.id = " + q(c.appid) + ";";
      p.line = l.next();
      l << "keys.appSecret = " + q(secret) + ";";
      l << "module.exports = keys;";
      break;
    case Obfuscation::Ternary:
      l << "var env = \"prod\";";
      p.line = l.next();
      l << "var secret = env == \"prod\" ? " + q(secret) + " : " + q(secret) + ";";
      l << "module.exports = { appid: " + q(c.appid) + ", secret: secret };";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_secret_url(Context& c, Obfuscation o, const std::string& secret) {
  Lines l;
  PlantCode p;
  const std::string proxy = "https://" + c.host + "/cgi/token";
  switch (o) {
    case Obfuscation::Plain:
      l << "function fetchToken(cb) {";
      l << "  wx.request({";
      p.line = l.next();
      l << "    url: " + q(proxy + "?grant_type=client_credential&appid=" + c.appid + "&secret=" + secret) + ",";
      l << "    success: function (res) { cb(res.data.access_token); }";
      l << "  });";
      l << "}";
      l << "module.exports = { fetchToken: fetchToken };";
      break;
    case Obfuscation::Renamed:
      l << "function t(e, n) {";
      p.line = l.next();
      l << "  var u = " + q(proxy + "?appid=") + " + e + " + q("&secret=" + secret) + ";";
      l << "  wx.request({ url: u, success: n });";
      l << "}";
      l << "module.exports = { t: t };";
      break;
    case Obfuscation::Detached:
      l << "var base = " + q(proxy + "?grant_type=client_credential") + ";";
      l << "var id = \"&appid=\" + " + q(c.appid) + ";";
      p.line = l.next();
      l << "var cred = " + q("&secret=" + secret) + ";";
      l << "function token(cb) {";
      l << "  wx.request({ url: base + id + cred, success: cb });";
      l << "}";
      l << "module.exports = { token: token };";
      break;
    case Obfuscation::Ternary:
      l << "var prod = true;";
      p.line = l.next();
      l << "var tokenUrl = prod ? " + q(proxy + "?secret=" + secret) + " : " +
               q("http://127.0.0.1:8080/cgi/token?secret=" + secret) + ";";
      l << "module.exports = { tokenUrl: tokenUrl };";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_session_url(Context& c, Obfuscation o) {
  Lines l;
  PlantCode p;
  const std::string path = coin(c.rng) ? pick(c.rng, kGetterUrls) : pick(c.rng, kDuplicationUrls);
  switch (o) {
    case Obfuscation::Plain:
      l << "function refresh(code, cb) {";
      l << "  wx.request({";
      p.line = l.next();
      l << "    url: " + q("https://" + c.host + path) + ",";
      l << "    data: { code: code },";
      l << "    success: function (res) { cb(res.data); }";
      l << "  });";
      l << "}";
      l << "module.exports = { refresh: refresh };";
      break;
    case Obfuscation::Renamed:
      l << "var a = require(\"../../utils/config.js\");";
      l << "function s(e, t) {";
      p.line = l.next();
      l << "  wx.request({ url: a.base + " + q(path) + ", data: { code: e }, success: t });";
      l << "}";
      l << "module.exports = { s: s };";
      break;
    case Obfuscation::Detached:
      l << "var api = {};";
      p.line = l.next();
      l << "api.sk = " + q(path) + ";";
      l << "function key(base, code, cb) {";
      l << "  wx.request({ url: base + api.sk, data: { code: code }, success: cb });";
      l << "}";
      l << "module.exports = { key: key };";
      break;
    case Obfuscation::Ternary:
      l << "function sk(base, dev, code, cb) {";
      p.line = l.next();
      l << "  var url = base + (dev ? \"/v1\" : \"/v2\") + " + q(path) + ";";
      l << "  wx.request({ url: url, data: { code: code }, success: cb });";
      l << "}";
      l << "module.exports = { sk: sk };";
      break;
  }
  p.text = l.str();
  return p;
}

PlantCode plant_missing_network(Context& c, Obfuscation o) {
  Lines l;
  PlantCode p;
  switch (o) {
    case Obfuscation::Plain:
      if (coin(c.rng)) {
        l << "Page({";
        l << "  data: { phone: \"\" },";
        p.line = l.next();
        l << "  getPhoneNumber: function (e) {";
        l << "    this.setData({ phone: e.detail.encryptedData });";
        l << "  }";
        l << "});";
      } else {
        l << "Page({";
        l << "  onLoad: function () {";
        l << "    var that = this;";
        p.line = l.next();
        l << "    wx.getWeRunData({";
        l << "      success: function (res) {";
        l << "        that.setData({ run: res.encryptedData, iv: res.iv });";
        l << "      }";
        l << "    });";
        l << "  }";
        l << "});";
      }
      break;
    case Obfuscation::Renamed:
      l << "var w = wx;";
      l << "Page({";
      l << "  onShow: function (t) {";
      l << "    var n = this;";
      p.line = l.next();
      l << "    w.getShareInfo({ shareTicket: t.shareTicket, success: function (e) { n.setData({ g: e.encryptedData }); } });";
      l << "  }";
      l << "});";
      break;
    case Obfuscation::Detached:
      l << "function onRun(res) {";
      l << "  wx.setStorageSync(\"run\", res.encryptedData);";
      l << "  wx.showToast({ title: \"synced\" });";
      l << "}";
      l << "function sync() {";
      p.line = l.next();
      l << "  wx.getWeRunData({ success: onRun });";
      l << "}";
      l << "module.exports = { sync: sync };";
      break;
    case Obfuscation::Ternary:
      l << "Page({";
      l << "  onLoad: function (q) {";
      l << "    var that = this;";
      p.line = l.next();
      l << "    wx.getGroupEnterInfo({";
      l << "      success: function (r) {";
      l << "        that.setData({ v: r ? r.encryptedData : \"\" });";
      l << "      }";
      l << "    });";
      l << "  }";
      l << "});";
      break;
  }
  p.text = l.str();
  return p;
}

struct PlantSpec {
  DetectorKind detector;
  std::optional<Obfuscation> obfuscation;
};

ForgedPackage build_package(Rng& rng, const std::vector<PlantSpec>& plants) {
  ForgedPackage out;
  Context c{rng, "wx" + rng.hex(16), pick(rng, kHosts), {}};
  for (const auto& p : plants) c.planted.insert(p.detector);
  out.appid = c.appid;
  out.master_key = rng.hex(32);

  std::vector<pkg::FileEntry> entries;
  const json project = {{"appid", c.appid}, {"projectname", pick(rng, kPages) + "-app"}, {"compileType", "miniprogram"}};
  entries.push_back(pkg::make_entry("project.config.json", project.dump(2)));
  entries.push_back(pkg::make_entry("app.js", app_js(c)));
  entries.push_back(pkg::make_entry("utils/config.js", config_js(c)));
  entries.push_back(pkg::make_entry("utils/util.js", util_js(c)));
  if (coin(rng)) entries.push_back(pkg::make_entry("lib/checksum.js", vendor_js(c)));

  json pages = json::array();
  std::set<std::string> used;
  auto fresh_page = [&] {
    std::string name = pick(rng, kPages);
    while (used.count(name)) name = pick(rng, kPages) + std::to_string(rng.uniform(2, 99));
    used.insert(name);
    pages.push_back("pages/" + name + "/index");
    return name;
  };
  const auto n_clean = rng.uniform(1, 3);
  for (std::int64_t i = 0; i < n_clean; ++i) {
    const std::string name = fresh_page();
    entries.push_back(pkg::make_entry("pages/" + name + "/index.js", clean_page(c, name)));
  }

  bool real_secret_used = false;
  for (const PlantSpec& spec : plants) {
    Plant plant;
    plant.detector = spec.detector;
    plant.obfuscation = spec.obfuscation ? *spec.obfuscation : kAllObfuscations[rng.uniform(0, 3)];
    const std::string name = fresh_page();
    plant.file = "pages/" + name + "/index.js";
    PlantCode code;
    switch (spec.detector) {
      case DetectorKind::BleMisconfig: code = plant_ble(c, plant.obfuscation); break;
      case DetectorKind::MissingCrossAppCheck: code = plant_cross_app(c, plant.obfuscation); break;
      case DetectorKind::MissingPrivateShareCheck: code = plant_private_share(c, plant.obfuscation); break;
      case DetectorKind::AppSecretString:
      case DetectorKind::AppSecretInUrl: {
        plant.secret = real_secret_used ? rng.hex(32) : out.master_key;
        real_secret_used = true;
        code = spec.detector == DetectorKind::AppSecretString
                   ? plant_secret_string(c, plant.obfuscation, *plant.secret)
                   : plant_secret_url(c, plant.obfuscation, *plant.secret);
        break;
      }
      case DetectorKind::SessionKeyUrl: code = plant_session_url(c, plant.obfuscation); break;
      case DetectorKind::SessionKeyMissingNetwork: code = plant_missing_network(c, plant.obfuscation); break;
    }
    plant.line = code.line;
    entries.push_back(pkg::make_entry(plant.file, code.text));
    out.plants.push_back(std::move(plant));
  }
  entries.push_back(pkg::make_entry("app.json", json{{"pages", pages}}.dump(2)));
  out.package = pkg::Package(std::move(entries));
  return out;
}

}  // namespace

Corpus generate(const ForgeOptions& options) {
  if (options.min_plants == 0 || options.min_plants > options.max_plants) {
    throw std::invalid_argument("bad plants-per-package range");
  }
  Rng rng(options.seed);
  std::vector<std::vector<PlantSpec>> groups;

  if (options.plants.empty()) {
    for (std::size_t i = 0; i < options.n_vulnerable; ++i) {
      std::vector<DetectorKind> kinds(detectors::kAllDetectors.begin(), detectors::kAllDetectors.end());
      for (std::size_t j = kinds.size() - 1; j > 0; --j) {
        std::swap(kinds[j], kinds[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(j)))]);
      }
      const auto k = static_cast<std::size_t>(rng.uniform(static_cast<std::int64_t>(options.min_plants),
                                                          static_cast<std::int64_t>(options.max_plants)));
      // the first packages cover every detector
      if (i < kinds.size()) {
        auto it = std::find(kinds.begin(), kinds.end(), detectors::kAllDetectors[i]);
        std::rotate(kinds.begin(), it, it + 1);
      }
      std::vector<PlantSpec> group;
      for (std::size_t j = 0; j < std::min(k, kinds.size()); ++j) group.push_back({kinds[j], std::nullopt});
      groups.push_back(std::move(group));
    }
  } else {
    std::vector<PlantSpec> all;
    for (const PlantRequest& r : options.plants) {
      for (std::size_t i = 0; i < r.count; ++i) all.push_back({r.detector, r.obfuscation});
    }
    for (const PlantSpec& s : all) {
      auto fits = [&](const std::vector<PlantSpec>& g) {
        if (g.size() >= options.max_plants) return false;
        return s.detector != DetectorKind::MissingCrossAppCheck ||
               std::none_of(g.begin(), g.end(),
                            [](const PlantSpec& x) { return x.detector == DetectorKind::MissingCrossAppCheck; });
      };
      auto it = std::find_if(groups.begin(), groups.end(), fits);
      if (it == groups.end()) {
        groups.push_back({s});
      } else {
        it->push_back(s);
      }
    }
  }

  std::vector<std::optional<std::size_t>> order;
  for (std::size_t i = 0; i < options.n_clean; ++i) order.push_back(std::nullopt);
  for (std::size_t i = 0; i < groups.size(); ++i) order.push_back(i);
  for (std::size_t j = order.size(); j > 1; --j) {
    std::swap(order[j - 1], order[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(j) - 1))]);
  }

  Corpus corpus;
  corpus.seed = options.seed;
  const int width = std::max<int>(4, static_cast<int>(std::to_string(order.size()).size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    ForgedPackage p = build_package(rng, order[i] ? groups[*order[i]] : std::vector<PlantSpec>{});
    std::string num = std::to_string(i + 1);
    p.id = "pkg-" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, num.size()), '0') + num;
    corpus.packages.push_back(std::move(p));
  }
  return corpus;
}

json manifest(const Corpus& corpus) {
  json packages = json::array();
  std::size_t total = 0;
  for (const ForgedPackage& p : corpus.packages) {
    json plants = json::array();
    for (const Plant& pl : p.plants) {
      json j = {{"detector", detectors::to_string(pl.detector)},
                {"file", pl.file},
                {"line", pl.line},
                {"obfuscation", to_string(pl.obfuscation)}};
      if (pl.secret) j["secret"] = *pl.secret;
      plants.push_back(std::move(j));
    }
    total += p.plants.size();
    packages.push_back({{"id", p.id},
                        {"file", p.id + ".mapkg"},
                        {"appid", p.appid},
                        {"clean", p.plants.empty()},
                        {"plants", plants}});
  }
  return {{"version", 1}, {"seed", corpus.seed}, {"total_plants", total}, {"packages", packages}};
}

keyval::MockSeed registrations(const Corpus& corpus) {
  keyval::MockSeed seed;
  for (const ForgedPackage& p : corpus.packages) {
    seed.registrations.push_back({p.appid, p.master_key, {"openapi.ocr.idCard", "jokebot"}});
  }
  return seed;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const ForgedPackage& p : corpus.packages) pkg::write_file(dir / (p.id + ".mapkg"), p.package);
  auto write_json = [&](const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
  };
  write_json(dir / "manifest.json", manifest(corpus));
  write_json(dir / "registrations.json", keyval::to_json(registrations(corpus)));
}

std::multiset<PlantKey> manifest_keys(const json& package_entry) {
  std::multiset<PlantKey> out;
  for (const json& p : package_entry.at("plants")) {
    out.insert({p.at("file").get<std::string>(), p.at("detector").get<std::string>()});
  }
  return out;
}

}  // namespace coffeescan::forge
