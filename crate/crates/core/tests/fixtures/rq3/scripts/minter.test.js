const { accounts, deploy, run } = require('./harness');

run(async () => {
  const m = await deploy('Minter');
  const minted = await m.call('owner', 'mint(address,uint256)', [accounts.alice, 100n]);
  const bal = await m.call('alice', 'balanceOf(address)', [accounts.alice]);
  const ok = minted.ok && bal.value === 100n;
  if (!ok) console.error('minter tests failed', { minted, bal });
  return ok;
});
