var config = { appid: "wxff60d952b9494209", secret: "3f2a9c5e8b1d4f607a9e2c4b6d8f0a1c" };
App({
  onLaunch: function () {
    wx.login({
      success: function (res) {
        wx.request({
          url: "https://shop.example.com/auth/jscode2session",
          data: { appid: config.appid, secret: config.secret, js_code: res.code },
          success: function (r) {
            wx.setStorageSync("sk", r.data.session_key);
          }
        });
      }
    });
  }
});
